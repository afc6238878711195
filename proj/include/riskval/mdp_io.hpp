#pragma once

#include <filesystem>
#include <string>

#include "riskval/mdp.hpp"

namespace riskval {

/// JSON fixture format for FiniteMdp:
///
///   {
///     "num_states": 3, "num_actions": 2, "initial_state": 0, "horizon": 2,
///     "terminal": [2],
///     "transitions": [[state, action, next, probability, reward], ...]
///   }
///
/// Transitions are listed in (state, action, insertion) order; parsing
/// preserves that order so round-trips are exact.
std::string mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const std::string& text);

void save_mdp(const FiniteMdp& mdp, const std::filesystem::path& path);
FiniteMdp load_mdp(const std::filesystem::path& path);

}  // namespace riskval
