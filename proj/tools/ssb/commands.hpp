#pragma once

#include <iosfwd>

#include "config.hpp"

namespace ssb::cli {

// Evaluation inputs that are present but unusable: exit code 4.
struct EvaluationInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int cmd_generate(const RunConfig& c, std::ostream& log);
int cmd_solve(const RunConfig& c, std::ostream& log);
int cmd_sample(const RunConfig& c, std::ostream& log);
int cmd_argmax(const RunConfig& c, std::ostream& log);
int cmd_evaluate(const RunConfig& c, std::ostream& log);
int cmd_lot(const RunConfig& c, std::ostream& log);
int cmd_oracle_check(const RunConfig& c, std::ostream& log);
int cmd_bench(const RunConfig& c, std::ostream& log);

}  // namespace ssb::cli
