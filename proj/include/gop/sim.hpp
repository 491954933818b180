#pragma once

#include <cstdint>
#include <functional>

#include "gop/mpc.hpp"
#include "gop/scenario.hpp"
#include "gop/trace.hpp"

namespace gop {

/// Builds the receding-horizon configuration a scenario implies.
MpcConfig mpc_config_from_scenario(const Scenario& scenario);

/// Observes each executed step together with the plan that produced it.
using StepObserver = std::function<void(const SimRecord&, const MpcStepResult&)>;

/// Runs the receding-horizon loop until the goal is reached (within the
/// scenario's tolerance) or the step budget runs out. Obstacles follow
/// their scripts exactly; the drone executes each plan's first command.
/// The seed is recorded in the summary; the loop itself is deterministic.
SimTrace run_scenario(const Scenario& scenario, std::uint64_t seed = 0,
                      const StepObserver& observer = nullptr);

}  // namespace gop
