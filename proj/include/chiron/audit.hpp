#pragma once
// Boundary instrumentation: every byte buffer that crosses an enclave
// boundary is logged with its taint label, and the audit flags anything
// non-public leaving an enclave, or any session-channel egress that was
// not produced by seal().

#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "chiron/policy.hpp"
#include "chiron/taint.hpp"

namespace chiron::harness {

enum class FlowDir : uint8_t { INGRESS, EGRESS };

struct BoundaryCrossing {
  uint64_t enclave_id = 0;
  FlowDir dir = FlowDir::INGRESS;
  sandbox::IoChannel channel = sandbox::IoChannel::HANDSHAKE;
  sandbox::TaintLabel label = sandbox::TaintLabel::PUBLIC;
  bool sealed_record = false;
  uint64_t size = 0;
  std::string note;
};

class BoundaryLog {
 public:
  void record(BoundaryCrossing c) {
    std::lock_guard lk(mu_);
    log_.push_back(std::move(c));
  }

  std::vector<BoundaryCrossing> snapshot() const {
    std::lock_guard lk(mu_);
    return log_;
  }

  size_t size() const {
    std::lock_guard lk(mu_);
    return log_.size();
  }

  void clear() {
    std::lock_guard lk(mu_);
    log_.clear();
  }

 private:
  mutable std::mutex mu_;
  std::vector<BoundaryCrossing> log_;
};

struct AuditViolation {
  BoundaryCrossing crossing;
  std::string why;
};

struct AuditReport {
  std::vector<AuditViolation> violations;
  bool clean() const { return violations.empty(); }
};

inline bool requires_sealed_egress(sandbox::IoChannel c) {
  using sandbox::IoChannel;
  return c == IoChannel::TO_HOLDER_CHANNEL || c == IoChannel::TO_PARAM_SERVER ||
         c == IoChannel::TO_PROVIDER || c == IoChannel::INTER_ENCLAVE;
}

inline AuditReport audit_boundary(std::span<const BoundaryCrossing> transcript) {
  AuditReport report;
  for (const auto& c : transcript) {
    if (c.dir != FlowDir::EGRESS) continue;
    if (c.label != sandbox::TaintLabel::PUBLIC) {
      report.violations.push_back({c, "non-public bytes left the enclave"});
      continue;
    }
    if (requires_sealed_egress(c.channel) && !c.sealed_record) {
      report.violations.push_back({c, "unsealed egress on a session channel"});
    }
  }
  return report;
}

}  // namespace chiron::harness
