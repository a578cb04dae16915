#pragma once

#include "config.hpp"

namespace glmfunk::cli {

// Each command writes its files under config.out_dir.
void cmd_fit(const RunConfig& c);
void cmd_predict(const RunConfig& c);
void cmd_cv(const RunConfig& c);
void cmd_infer(const RunConfig& c);
void cmd_simulate(const RunConfig& c);

}  // namespace glmfunk::cli
