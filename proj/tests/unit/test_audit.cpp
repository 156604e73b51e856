#include <doctest.h>

#include "helpers.hpp"
#include "uarl/audit.hpp"
#include "uarl/error.hpp"

using namespace uarl;

TEST_CASE("target-proxy reads inside a training scope are violations") {
  AccessAudit audit;
  const auto d = testing::small_dataset(Role::nominal);
  const TargetProxy tp(d.retagged(Role::target_proxy), audit);
  (void)tp.read("gate");
  CHECK(audit.reads() == 1);
  CHECK(audit.violations() == 0);
  {
    auto scope = audit.training_scope();
    CHECK(audit.in_training());
    (void)tp.read("leak");
  }
  CHECK_FALSE(audit.in_training());
  CHECK(audit.violations() == 1);
  CHECK(audit.readers().size() == 2);
}

TEST_CASE("training data overlapping the target proxy is flagged") {
  AccessAudit audit;
  const auto d = testing::small_dataset(Role::nominal);
  audit.register_target(d.retagged(Role::target_proxy));
  audit.check_training_data(testing::small_dataset(Role::nominal, 1.0, 4, 99));
  CHECK(audit.overlaps() == 0);
  audit.check_training_data(d);
  CHECK(audit.overlaps() > 0);
  CHECK(audit.violations() > 0);
}

TEST_CASE("the proxy wrapper only accepts target-proxy data") {
  AccessAudit audit;
  CHECK_THROWS_AS(TargetProxy(testing::small_dataset(Role::nominal), audit), RoleError);
}
