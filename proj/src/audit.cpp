#include "uarl/audit.hpp"

#include <algorithm>
#include <cstring>

#include "uarl/error.hpp"
#include "uarl/log.hpp"

namespace uarl {

namespace {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_vec(const Vec& v, std::uint64_t h) {
  return fnv1a(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double), h);
}

}  // namespace

std::uint64_t fingerprint(const Transition& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = hash_vec(t.state, h);
  h = hash_vec(t.action, h);
  h = fnv1a(&t.reward, sizeof t.reward, h);
  return hash_vec(t.next_state, h);
}

void AccessAudit::record_read(const std::string& reader) {
  ++reads_;
  if (in_training()) {
    ++violations_;
    log(LogLevel::error, "target-proxy data read on a training path by '" + reader + "'");
  }
  if (std::find(readers_.begin(), readers_.end(), reader) == readers_.end()) {
    readers_.push_back(reader);
  }
}

void AccessAudit::register_target(const Dataset& target) {
  for (std::size_t i = 0; i < target.size(); ++i) fingerprints_.insert(fingerprint(target[i]));
}

void AccessAudit::check_training_data(const Dataset& data) {
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (fingerprints_.contains(fingerprint(data[i]))) ++hits;
  }
  if (hits > 0) {
    overlaps_ += hits;
    violations_ += hits;
    log(LogLevel::error, std::to_string(hits) + " target-proxy transitions found in training data");
  }
}

void to_json(nlohmann::json& j, const AccessAudit& a) {
  j = {{"reads", a.reads()},
       {"violations", a.violations()},
       {"overlaps", a.overlaps()},
       {"readers", a.readers()}};
}

TargetProxy::TargetProxy(Dataset data, AccessAudit& audit) : data_(std::move(data)), audit_(audit) {
  if (data_.role() != Role::target_proxy) {
    throw RoleError("TargetProxy: dataset role is '" + std::string(to_string(data_.role())) + "'");
  }
  if (data_.empty()) throw InvalidArgument("TargetProxy: empty dataset");
  audit_.register_target(data_);
}

const Dataset& TargetProxy::read(const std::string& reader) const {
  audit_.record_read(reader);
  return data_;
}

}  // namespace uarl
