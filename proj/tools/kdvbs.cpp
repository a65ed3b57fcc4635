// kdvbs: kernel synthesis, closed-loop simulation, lambda sweeps and spectra.
// Exit codes: 0 success, 2 configuration or usage error, 3 solver or
// simulation failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kdvbs/scenario.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

struct Options {
  std::string config_path;
  std::string lambda, grid, out, lambda_list;
  bool open_loop = false;
};

// Flags become `key = value` lines appended after the file, so they win.
kdvbs::SimConfig resolve(const Options& o) {
  std::string text;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw kdvbs::ConfigError("config", "cannot read " + o.config_path);
    std::ostringstream s;
    s << in.rdbuf();
    text = s.str() + "\n";
  }
  if (!o.lambda.empty()) text += "lambda = " + o.lambda + "\n";
  if (!o.grid.empty()) text += "n = " + o.grid + "\n";
  if (!o.out.empty()) text += "output_prefix = " + o.out + "\n";
  if (o.open_loop) text += "open_loop = true\n";
  return kdvbs::parse_config(text);
}

std::vector<double> lambda_values(const std::string& list) {
  std::vector<double> out;
  std::istringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = kdvbs::detail::trim(item);
    if (!item.empty()) out.push_back(kdvbs::detail::parse_real("lambda-list", item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backstepping output-feedback toolkit for the linear KdV equation"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config_path, "key = value configuration file");
  app.add_option("--lambda", o.lambda, "target decay rate");
  app.add_option("--grid", o.grid, "number of grid nodes");
  app.add_option("--out", o.out, "output prefix");
  app.add_flag("--open-loop", o.open_loop, "disable the feedback (kappa = 0, no observer)");
  auto* lambda_list = app.add_option("--lambda-list", o.lambda_list, "comma-separated lambdas for sweep");

  auto* kernel = app.add_subcommand("kernel", "solve k and p, write kernels, gains and residuals");
  auto* simulate = app.add_subcommand("simulate", "closed-loop run with diagnostics");
  auto* sweep = app.add_subcommand("sweep", "one closed-loop run per lambda");
  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of the loop operator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    const kdvbs::SimConfig c = resolve(o);
    if (kernel->parsed()) {
      std::cout << kdvbs::run_synthesis(c).dump(2) << '\n';
    } else if (simulate->parsed()) {
      std::cout << kdvbs::run_closed_loop(c).summary.dump(2) << '\n';
    } else if (sweep->parsed()) {
      const auto lambdas = lambda_list->count() ? lambda_values(o.lambda_list) : std::vector<double>{c.lambda};
      bool all_ok = true;
      for (const auto& e : kdvbs::run_sweep(c, lambdas)) {
        if (e.ok) {
          std::printf("lambda=%s lambda_fit=%s max_real_eig=%s\n", kdvbs::format_number(e.lambda).c_str(),
                      kdvbs::format_number(e.lambda_fit).c_str(), kdvbs::format_number(e.max_real_eig).c_str());
        } else {
          all_ok = false;
          std::fprintf(stderr, "lambda=%s failed: %s\n", kdvbs::format_number(e.lambda).c_str(), e.error.c_str());
        }
      }
      return all_ok ? 0 : kSolverError;
    } else if (spectrum->parsed()) {
      const auto r = kdvbs::run_spectrum(c);
      std::printf("eigenvalues=%zu max_real_eig=%s\n", r.eigenvalues.size(), kdvbs::format_number(r.max_real).c_str());
    }
  } catch (const kdvbs::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kConfigError;
  } catch (const kdvbs::KernelSolveFailure& e) {
    std::fprintf(stderr, "%s (degree %d)\n", e.what(), e.report().degree);
    return kSolverError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return kSolverError;
  }
  return 0;
}
