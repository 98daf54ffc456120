#pragma once

#include <optional>
#include <string>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/errors.hpp"
#include "chaos_tails/json_io.hpp"
#include "chaos_tails/monte_carlo_lab.hpp"

namespace chaos_tails {

/// 0 success, 1 bound falsified, 2 bad input, 3 assumption failure, 4 too large.
int exit_code_for(ErrorCode code);

/// The bound for --theorem / --mode from an assumptions document. Moment
/// theorems in tail mode go through Markov's inequality. p_csv overrides "p".
BoundResult build_bound(int theorem, const std::string& mode, const json_io::json& assumptions,
                        const std::string& p_csv = "");

struct CampaignRun {
  VerificationReport report;
  json_io::json document;  // header + body as written by verify --out
};

/// Runs a campaign config; scale_bound overrides "scale_bound".
CampaignRun run_campaign(const json_io::json& config, std::optional<double> scale_bound = {});

/// Entry point of the chaos-tails command line.
int run_cli(int argc, char** argv);

}  // namespace chaos_tails
