#include "safenav/app.hpp"

int main(int argc, char** argv) { return safenav::app::run_cli(argc, argv); }
