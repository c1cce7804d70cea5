// ssb: generate, solve, sample, evaluate from a flat key-value config.
//
// Exit codes: 0 ok, 2 usage, 3 solver infeasibility, 4 evaluation input
// error, 5 internal.

#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "json.hpp"
#include "ssb/error.hpp"

namespace {

using namespace ssb::cli;

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kEvalInput = 4, kInternal = 5 };

int exit_for(ssb::ErrorCode code, bool evaluating) {
  using ssb::ErrorCode;
  switch (code) {
    case ErrorCode::AllNegInfMessage:
    case ErrorCode::ZeroMarginalMass:
      return kInfeasible;
    case ErrorCode::MissingGroundTruth:
    case ErrorCode::EmptyCloud:
    case ErrorCode::UnequalSupportSizes:
      return kEvalInput;
    case ErrorCode::InvalidHoldOut:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnsupportedOrder:
    case ErrorCode::ParseError:
    case ErrorCode::InconsistentDimension:
    case ErrorCode::DuplicatePoint:
    case ErrorCode::IoError:
    case ErrorCode::StartNotInSupport:
    case ErrorCode::SizeCapExceeded:
      return evaluating ? kEvalInput : kUsage;
    default:
      return kInternal;
  }
}

struct Common {
  std::string config_file;
  std::string preset;
  std::vector<std::string> sets;
  std::string input;
  std::string output;
  bool dry_run = false;
};

void add_common(CLI::App* sub, Common& o) {
  sub->add_option("-c,--config", o.config_file, "config file (key = value lines)");
  sub->add_option("-p,--preset", o.preset, "named hyper-parameter preset");
  sub->add_option("-s,--set", o.sets, "override, key=value (repeatable)");
  sub->add_option("-i,--input", o.input, "snapshot CSV (paths.input)");
  sub->add_option("-o,--output", o.output, "output directory (paths.output)");
  sub->add_flag("--dry-run", o.dry_run, "validate the config and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth Schrodinger bridge trajectory inference"};
  app.require_subcommand(1);
  Common opts;
  using Command = std::function<int(const RunConfig&, std::ostream&)>;
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"generate", "write a synthetic dataset with ground truth", cmd_generate},
      {"solve", "run message passing, cache Gamma and messages", cmd_solve},
      {"sample", "draw trajectories from the solved bridge", cmd_sample},
      {"argmax", "greedy most likely trajectory", cmd_argmax},
      {"evaluate", "tracking or point-cloud metrics", cmd_evaluate},
      {"lot", "leave one time step out and infer it", cmd_lot},
      {"oracle-check", "message passing against Sinkhorn on the full cost tensor", cmd_oracle_check},
      {"bench", "seconds per iteration against M and d", cmd_bench},
  };
  std::map<CLI::App*, Command> dispatch;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, opts);
    dispatch[sub] = fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const bool evaluating = chosen->get_name() == "evaluate";
  try {
    KeyValues file;
    if (!opts.config_file.empty()) file = read_config_file(opts.config_file);
    KeyValues flags;
    for (const auto& s : opts.sets) flags.insert_or_assign(parse_assignment(s).first, parse_assignment(s).second);
    if (!opts.preset.empty()) flags["preset"] = opts.preset;
    if (!opts.input.empty()) flags["paths.input"] = opts.input;
    if (!opts.output.empty()) flags["paths.output"] = opts.output;
    const RunConfig config = resolve_config(file, flags);
    if (opts.dry_run) {
      nlohmann::json j;
      for (const auto& [k, v] : config.values) j["config"][k] = v;
      j["config_hash"] = config.hash;
      std::cout << j.dump(2) << '\n';
      return kOk;
    }
    return dispatch.at(chosen)(config, std::cout);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const EvaluationInputError& e) {
    std::cerr << "evaluation input error: " << e.what() << '\n';
    return kEvalInput;
  } catch (const ssb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_for(e.code(), evaluating);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
