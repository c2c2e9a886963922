#pragma once

#include <optional>
#include <string>

#include "run_config.hpp"

namespace wran::cli {

struct AdaptFlags {
  bool no_relation = false;
  bool no_instance = false;
  bool no_gate = false;
  double fixed_alpha = 0.5;
  std::optional<double> sm_coeff;
  double fine_tune_frac = 0.0;
};

// Each command returns the primary artifact path it wrote. Paths left empty
// default to files under cfg.out_dir.
std::string cmd_gen(const RunConfig& cfg, std::string out_dir);
std::string cmd_pretrain(const RunConfig& cfg, const std::string& data_dir, std::string out_ckpt);
std::string cmd_weights(const RunConfig& cfg, const std::string& ckpt, const std::string& data_dir,
                        std::string out_weights, std::string out_ckpt);
std::string cmd_adapt(const RunConfig& cfg, const std::string& ckpt, const std::string& weights,
                      const std::string& data_dir, std::string out_ckpt, const AdaptFlags& flags);
std::string cmd_eval(const RunConfig& cfg, const std::string& ckpt, const std::string& data_dir,
                     std::string out_metrics);
std::string cmd_theory(const RunConfig& cfg, std::string out_dir);

}  // namespace wran::cli
