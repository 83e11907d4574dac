#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "safenav/error.hpp"

namespace safenav {

enum class SignalKind { Real, Boolean };

struct SignalSpec {
  std::string name;
  SignalKind kind{SignalKind::Real};
  std::string unit;  // "kph", "m", "s" or empty
  friend bool operator==(const SignalSpec&, const SignalSpec&) = default;
};

/// Ordered signal declaration shared by traces, samples and monitors.
class SignalSchema {
 public:
  SignalSchema() = default;
  explicit SignalSchema(std::vector<SignalSpec> specs) : specs_(std::move(specs)) {}

  void add(SignalSpec spec) { specs_.push_back(std::move(spec)); }

  std::size_t size() const { return specs_.size(); }
  const std::vector<SignalSpec>& specs() const { return specs_; }
  const SignalSpec& operator[](std::size_t i) const { return specs_[i]; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < specs_.size(); ++i)
      if (specs_[i].name == name) return i;
    return std::nullopt;
  }
  bool contains(const std::string& name) const { return find(name).has_value(); }

  friend bool operator==(const SignalSchema&, const SignalSchema&) = default;

 private:
  std::vector<SignalSpec> specs_;
};

/// Boolean signals are carried as +1 / -1.
inline double encode_bool(bool b) { return b ? 1.0 : -1.0; }

struct Sample {
  double t{0.0};
  std::vector<double> values;  // aligned with the schema
};

class TraceError : public Error {
 public:
  using Error::Error;
};

/// Uniformly sampled multi-signal record. Sample k sits at t0 + k*dt.
class Trace {
 public:
  Trace() = default;
  Trace(SignalSchema schema, double dt, double t0 = 0.0)
      : schema_(std::move(schema)), dt_(dt), t0_(t0), columns_(schema_.size()) {
    if (!(dt > 0.0)) throw TraceError("trace dt must be positive");
  }

  const SignalSchema& schema() const { return schema_; }
  double dt() const { return dt_; }
  double t0() const { return t0_; }
  std::size_t size() const { return columns_.empty() ? count_ : columns_.front().size(); }
  bool empty() const { return size() == 0; }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) * dt_; }

  /// Appends values (aligned with the schema) at the next tick.
  void push_back(const std::vector<double>& values) {
    if (values.size() != schema_.size()) throw TraceError("sample width does not match schema");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (schema_[i].kind == SignalKind::Boolean && values[i] != 1.0 && values[i] != -1.0)
        throw TraceError("boolean signal '" + schema_[i].name + "' must be +1 or -1");
      columns_[i].push_back(values[i]);
    }
    ++count_;
  }

  /// Appends a timestamped sample; its time must be exactly the next tick.
  void push_back(const Sample& s) {
    if (std::abs(s.t - time(size())) > 1e-9 * std::max(1.0, std::abs(s.t)))
      throw TraceError("sample time does not match the next tick");
    push_back(s.values);
  }

  const std::vector<double>& column(std::size_t signal) const { return columns_.at(signal); }
  const std::vector<double>& column(const std::string& name) const {
    auto idx = schema_.find(name);
    if (!idx) throw TraceError("missing signal '" + name + "'");
    return columns_[*idx];
  }
  double value(std::size_t signal, std::size_t k) const { return columns_.at(signal).at(k); }
  double value(const std::string& name, std::size_t k) const { return column(name).at(k); }

  Sample sample(std::size_t k) const {
    Sample s{time(k), {}};
    s.values.reserve(columns_.size());
    for (const auto& c : columns_) s.values.push_back(c.at(k));
    return s;
  }

  /// Samples [first, first+count) as a new trace starting at time(first).
  Trace slice(std::size_t first, std::size_t count) const {
    Trace out(schema_, dt_, time(first));
    for (std::size_t k = first; k < first + count && k < size(); ++k) out.push_back(sample(k).values);
    return out;
  }

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  SignalSchema schema_;
  double dt_{1.0};
  double t0_{0.0};
  std::vector<std::vector<double>> columns_;
  std::size_t count_{0};
};

}  // namespace safenav
