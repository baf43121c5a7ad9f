#pragma once

// Named constants with provenance, shared by the verification stages.

#include "joris/errors.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace joris {

enum class Provenance { closed_form, fitted, derived, assumed };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::closed_form: return "closed-form";
    case Provenance::fitted: return "fitted";
    case Provenance::derived: return "derived";
    case Provenance::assumed: return "assumed";
  }
  return "?";
}

struct LedgerEntry {
  std::string name;
  double value = 0;
  Provenance provenance = Provenance::derived;
  std::string note;
};

/// Append-only record. Re-recording a name appends a new revision; lookups
/// return the latest one.
class ConstantLedger {
 public:
  ConstantLedger() = default;
  ConstantLedger(const ConstantLedger& o) { assign(o.history()); }
  ConstantLedger& operator=(const ConstantLedger& o) {
    if (this != &o) {
      auto h = o.history();
      std::lock_guard lock(mutex_);
      entries_.clear();
      latest_.clear();
      assign(h);
    }
    return *this;
  }

  void record(const std::string& name, double value, Provenance p, const std::string& note = "") {
    std::lock_guard lock(mutex_);
    entries_.push_back({name, value, p, note});
    latest_[name] = entries_.size() - 1;
  }

  bool has(const std::string& name) const {
    std::lock_guard lock(mutex_);
    return latest_.count(name) != 0;
  }

  double get(const std::string& name) const { return entry(name).value; }

  LedgerEntry entry(const std::string& name) const {
    std::lock_guard lock(mutex_);
    auto it = latest_.find(name);
    if (it == latest_.end()) throw PreconditionError("constant '" + name + "' is not in the ledger");
    return entries_[it->second];
  }

  /// Throws unless every name is recorded.
  void require(const std::vector<std::string>& names) const {
    for (const auto& n : names) (void)entry(n);
  }

  std::vector<LedgerEntry> history() const {
    std::lock_guard lock(mutex_);
    return entries_;
  }

  nlohmann::json to_json() const {
    std::lock_guard lock(mutex_);
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, idx] : latest_) {
      const auto& e = entries_[idx];
      out[name] = {{"value", e.value}, {"provenance", to_string(e.provenance)}, {"note", e.note}};
    }
    return out;
  }

  void merge(const ConstantLedger& other, const std::string& prefix = "") {
    for (const auto& e : other.history()) record(prefix + e.name, e.value, e.provenance, e.note);
  }

 private:
  void assign(const std::vector<LedgerEntry>& h) {
    for (const auto& e : h) {
      entries_.push_back(e);
      latest_[e.name] = entries_.size() - 1;
    }
  }

  mutable std::mutex mutex_;
  std::vector<LedgerEntry> entries_;
  std::map<std::string, std::size_t> latest_;
};

}  // namespace joris
