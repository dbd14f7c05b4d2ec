#include <iostream>

#include "CLI11.hpp"

#include "condual/cli_reporting.hpp"

namespace {

struct Flags {
  std::string market;
  std::string utility = "log";
  std::string x;
  std::string y;
  double solver_tol = 1e-8;
  double tol = 1e-5;
  bool json = false;
  std::uint64_t seed = 42;
  std::string payoff;
  std::string endowment;
  std::string pricing;
  std::vector<std::string> only;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace condual;
  CLI::App app{"Utility maximization duality on finite event-tree markets"};
  app.require_subcommand(1);
  Flags f;
  app.add_flag("--json", f.json, "Emit the JSON report instead of the text table");

  auto market_opt = [&](CLI::App* sub) { sub->add_option("--market", f.market, "Market JSON file")->required(); };
  auto utility_opt = [&](CLI::App* sub) {
    sub->add_option("--utility", f.utility, "log, power, power:P, linear, or a JSON descriptor");
  };
  auto tol_opts = [&](CLI::App* sub) {
    sub->add_option("--solver-tol", f.solver_tol, "Solver tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--tol", f.tol, "Verification tolerance")->check(CLI::PositiveNumber);
  };
  auto json_flag = [&](CLI::App* sub) { sub->add_flag("--json", f.json, "Emit the JSON report"); };

  auto* primal = app.add_subcommand("solve-primal", "Primal value u(x) and optimal holdings");
  market_opt(primal);
  utility_opt(primal);
  primal->add_option("--x,--x-grid", f.x, "Initial wealth (comma list for a grid)")->required();
  tol_opts(primal);
  json_flag(primal);

  auto* dual = app.add_subcommand("solve-dual", "Dual value v(y) and the minimizing measure");
  market_opt(dual);
  utility_opt(dual);
  dual->add_option("--y,--y-grid", f.y, "Dual variable (comma list for a grid)")->required();
  tol_opts(dual);
  json_flag(dual);

  auto* duality = app.add_subcommand("verify-duality", "Conjugacy of u and v on grids, and the xbar triple");
  market_opt(duality);
  utility_opt(duality);
  duality->add_option("--x-grid", f.x, "Comma list of wealths")->required();
  duality->add_option("--y-grid", f.y, "Comma list of dual variables")->required();
  tol_opts(duality);
  json_flag(duality);

  auto* link = app.add_subcommand("verify-link", "Terminal wealth against -V'(y dQ/dP)");
  market_opt(link);
  utility_opt(link);
  link->add_option("--x", f.x, "Initial wealth (default 1)");
  tol_opts(link);
  json_flag(link);

  auto* hedge = app.add_subcommand("superhedge", "Superhedging price by primal and dual LP");
  market_opt(hedge);
  hedge->add_option("--payoff", f.payoff, "Leaf payoff: JSON object by leaf id, or comma list in leaf order")->required();
  json_flag(hedge);

  auto* xbar = app.add_subcommand("xbar", "Three computations of the least finite initial wealth");
  market_opt(xbar);
  xbar->add_option("--tol", f.tol, "Agreement tolerance")->check(CLI::PositiveNumber);
  json_flag(xbar);

  auto* cond = app.add_subcommand("check-conditions", "Nonemptiness, closedness and supermartingale certificate");
  market_opt(cond);
  cond->add_option("--x", f.x, "Wealth for the compactness check (default 1)");
  json_flag(cond);

  auto* embed = app.add_subcommand("embed-endowment", "Endowment as an extra asset with fixed holding 1");
  market_opt(embed);
  utility_opt(embed);
  embed->add_option("--endowment", f.endowment, "Leaf endowment (default: the market file's \"endowment\")");
  embed->add_option("--pricing", f.pricing, "Martingale measure on the leaves")->required();
  embed->add_option("--x", f.x, "Initial wealth; also solves the augmented market");
  embed->add_option("--solver-tol", f.solver_tol, "Solver tolerance")->check(CLI::PositiveNumber);
  json_flag(embed);

  auto* props = app.add_subcommand("properties", "Randomized invariant suite");
  props->add_option("--seed", f.seed, "RNG seed");
  props->add_option("--only", f.only, "Run only these properties");
  json_flag(props);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  RunConfig config;
  config.command = app.get_subcommands().front()->get_name();
  config.market_path = f.market;
  config.utility = f.utility;
  config.solver_tol = f.solver_tol;
  config.verify_tol = f.tol;
  config.format = f.json ? OutputFormat::json : OutputFormat::text;
  config.seed = f.seed;
  config.payoff = f.payoff;
  config.endowment = f.endowment;
  config.pricing = f.pricing;
  config.only = f.only;
  try {
    if (!f.x.empty()) config.x_grid = parse_grid(f.x, "--x");
    if (!f.y.empty()) config.y_grid = parse_grid(f.y, "--y");
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }

  const RunResult result = run(config);
  std::cout << emit_report(result.report, config.format);
  if (!result.error.empty()) std::cerr << "error: " << result.error << '\n';
  return result.exit_code;
}
