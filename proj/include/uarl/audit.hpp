#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "uarl/data.hpp"

namespace uarl {

/// Records every read of the target-proxy dataset and whether it happened on a
/// training path. Also fingerprints D_t so any training dataset that contains one of
/// its transitions is caught.
class AccessAudit {
 public:
  /// Marks the enclosing region as a training path while alive.
  class TrainingScope {
   public:
    explicit TrainingScope(AccessAudit& audit) : audit_(audit) { ++audit_.training_depth_; }
    ~TrainingScope() { --audit_.training_depth_; }
    TrainingScope(const TrainingScope&) = delete;
    TrainingScope& operator=(const TrainingScope&) = delete;

   private:
    AccessAudit& audit_;
  };

  TrainingScope training_scope() { return TrainingScope(*this); }
  bool in_training() const { return training_depth_.load() > 0; }

  void record_read(const std::string& reader);
  /// Counts transitions of `data` that also occur in the registered target proxy.
  void check_training_data(const Dataset& data);
  void register_target(const Dataset& target);

  std::int64_t reads() const { return reads_.load(); }
  std::int64_t violations() const { return violations_.load(); }
  std::int64_t overlaps() const { return overlaps_.load(); }
  std::vector<std::string> readers() const { return readers_; }

 private:
  std::atomic<int> training_depth_{0};
  std::atomic<std::int64_t> reads_{0};
  std::atomic<std::int64_t> violations_{0};
  std::atomic<std::int64_t> overlaps_{0};
  std::vector<std::string> readers_;
  std::unordered_set<std::uint64_t> fingerprints_;
};

void to_json(nlohmann::json& j, const AccessAudit& a);

/// Fingerprint of a transition's state, action, reward and next state bytes.
std::uint64_t fingerprint(const Transition& t);

/// The target-proxy dataset behind an audited accessor.
class TargetProxy {
 public:
  TargetProxy(Dataset data, AccessAudit& audit);

  /// Logged access; a read while a training scope is open counts as a violation.
  const Dataset& read(const std::string& reader) const;
  std::size_t size() const { return data_.size(); }

 private:
  Dataset data_;
  AccessAudit& audit_;
};

}  // namespace uarl
