#include "riskval/losses.hpp"

#include <string>

namespace riskval {

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind kind : kAllLossKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw InputError("unknown loss kind '" + std::string(name) + "' (expected MSE, EMSE, SP or IS)");
}

}  // namespace riskval
