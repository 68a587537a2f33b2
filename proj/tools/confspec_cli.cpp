#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "confspec/errors.hpp"
#include "confspec/kernels.hpp"
#include "confspec/records.hpp"

using namespace confspec;

namespace {

struct ParamOpt {
  std::string flag;
  std::string key;
  char type;  // i integer, d number, l list, s string, b flag
  std::string help;
};

struct Command {
  std::string task;
  std::string help;
  std::vector<ParamOpt> params;
  std::vector<std::string> actions;
};

std::vector<ParamOpt> optimize_params(bool with_k) {
  std::vector<ParamOpt> p{
      {"--direction", "direction", 's', "min or max"},
      {"--p-schedule", "p_schedule", 'l', "decreasing exponents, e.g. 3.0,2.2,1.8,1.55"},
      {"--iters", "iters", 'i', "iterations per exponent"},
      {"--theta", "theta", 'd', "initial damping in (0, 1]"},
      {"--tol-fun", "tol_fun", 'd', "relative gain tolerance"},
      {"--tol-residual", "tol_residual", 'd', "Euler-Lagrange residual tolerance"},
      {"--floor-eps", "floor_eps", 'd', "additive weight floor"},
      {"--seed-amplitude", "seed_amplitude", 'd', "random perturbation of the initial weight"},
      {"--snapshots", "snapshots", 'i', "tail snapshots kept for concentration"},
      {"--delta", "delta", 'd', "concentration ball radius"},
      {"--reference", "reference", 'd', "comparison value for the verdict"},
      {"--seed-beta", "seed_beta", 's', "CSV field with the initial weight"}};
  if (with_k) p.push_back({"--k", "k", 'i', "eigenvalue index"});
  else {
    p.push_back({"--k-from", "k_from", 'i', "first index"});
    p.push_back({"--k-to", "k_to", 'i', "last index"});
  }
  return p;
}

std::vector<Command> commands() {
  return {
      {"constants", "closed-form constants and sphere spectrum", {{"--L", "L", 'i', "max degree"}}, {}},
      {"eigen",
       "spectrum classification or weighted eigenvalues",
       {{"--count", "count", 'i', "number of operator eigenvalues"},
        {"--beta", "beta", 's', "const or CSV field"},
        {"--column", "column", 's', "CSV column"},
        {"--p", "p", 'd', "norm exponent for lambda_bar"},
        {"--kmax", "kmax", 'i', "largest index"}},
       {"classify", "solve"}},
      {"variation",
       "directional derivatives and Euler-Lagrange certificates",
       {{"--beta", "beta", 's', "CSV field"},
        {"--dir", "dir", 's', "CSV direction field"},
        {"--column", "column", 's', "CSV column"},
        {"--k", "k", 'i', "eigenvalue index"},
        {"--t", "t", 'd', "finite-difference step"},
        {"--p", "p", 'd', "norm exponent"},
        {"--direction", "direction", 's', "min or max"}},
       {"ddiff", "certify"}},
      {"optimize", "continuation in p with the Euler-Lagrange iteration", optimize_params(true), {}},
      {"sweep", "optimize over a range of indices", optimize_params(false), {}},
      {"bubbling",
       "concentration report for a run record",
       {{"--run", "run", 's', "run record JSON"},
        {"--delta", "delta", 'd', "ball radius"},
        {"--window", "window", 'i', "snapshots scanned"}},
       {}},
      {"xk",
       "X_k and Y_k from an invariant table",
       {{"--table", "table", 's', "table JSON"},
        {"--sphere", "sphere", 'b', "use the sphere table"},
        {"--higher", "higher", 'l', "estimates for k >= 3"},
        {"--k", "k", 'i', "index"}},
       {}},
      {"bubble-sweep",
       "Rayleigh quotients of glued bubbles",
       {{"--variant", "variant", 's', "plain or green"},
        {"--eps", "eps", 'l', "scales"},
        {"--delta", "delta", 'd', "cutoff radius"},
        {"--center", "center", 'l', "center coordinates"}},
       {}},
      {"demo-unbounded",
       "renormalized eigenvalues along an unbounded weight family",
       {{"--eps", "eps", 'l', "scales"},
        {"--use-k-minus", "use_k_minus", 'b', "follow k_minus instead of k_plus"},
        {"--center", "center", 'l', "center coordinates"}},
       {}},
      {"sphere-table",
       "sphere invariant table",
       {{"--k-max", "k_max", 'i', "largest index"},
        {"--iters", "iters", 'i', "iterations per exponent"},
        {"--bump-width", "bump_width", 'd', "seed bump width"}},
       {}},
  };
}

json convert(const ParamOpt& o, const std::string& raw) {
  try {
    size_t used = 0;
    switch (o.type) {
      case 'i': {
        const long long v = std::stoll(raw, &used);
        if (used != raw.size()) break;
        return v;
      }
      case 'd': {
        const double v = std::stod(raw, &used);
        if (used != raw.size()) break;
        return v;
      }
      case 'l': {
        json arr = json::array();
        std::stringstream ss(raw);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          const double v = std::stod(tok, &used);
          if (used != tok.size()) throw std::invalid_argument(tok);
          arr.push_back(v);
        }
        return arr;
      }
      default:
        return raw;
    }
  } catch (const std::exception&) {
  }
  throw InvalidConfig("option " + o.flag + " expects " +
                      (o.type == 'i' ? "an integer" : o.type == 'l' ? "a comma-separated list of numbers" : "a number"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized eigenvalues of GJMS-type operators and their renormalized extrema"};
  app.require_subcommand(1);

  BackendSpec backend;
  std::string kind = "sphere", out, config_path, action;
  unsigned long long seed = 1;
  bool as_json = false;
  std::map<std::string, std::string> raw;
  std::map<std::string, bool> flags;

  const std::vector<Command> cmds = commands();
  std::vector<CLI::App*> subs;
  for (const Command& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.task, c.help);
    subs.push_back(sub);
    if (!c.actions.empty())
      sub->add_option("action", action, "one of: " + CLI::detail::join(c.actions, ", "))
          ->check(CLI::IsMember(c.actions));
    sub->add_option("--backend", kind, "sphere or torus");
    sub->add_option("--n", backend.n, "dimension");
    sub->add_option("--s", backend.s, "operator order");
    sub->add_option("--c", backend.c, "torus shift");
    sub->add_option("--trunc", backend.truncation, "truncation L");
    sub->add_option("--density", backend.quad_density, "quadrature oversampling");
    sub->add_flag("--axial", backend.axial, "axially symmetric sphere reduction");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out, "record path (JSON, sidecars next to it)");
    sub->add_option("--config", config_path, "JSON config file (same schema as the record echo)");
    sub->add_flag("--json", as_json, "print the record on stdout");
    for (const ParamOpt& o : c.params) {
      if (o.type == 'b')
        sub->add_flag(o.flag, flags[o.key], o.help);
      else
        sub->add_option(o.flag, raw[o.key], o.help)
            ->type_name(o.type == 'i' ? "INT" : o.type == 'd' ? "FLOAT" : o.type == 'l' ? "LIST" : "TEXT");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    kernels::apply_thread_env();
    RunConfig cfg;
    size_t which = 0;
    while (!subs[which]->parsed()) ++which;
    const Command& cmd = cmds[which];
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw InvalidConfig("cannot read " + config_path);
      json j;
      try {
        j = json::parse(f);
      } catch (const json::parse_error& e) {
        throw InvalidConfig(std::string("malformed config: ") + e.what());
      }
      cfg = parse_config(j);
      if (cfg.task != cmd.task) throw InvalidConfig("config task does not match the subcommand");
      if (!out.empty()) cfg.out = out;
    } else {
      cfg.task = cmd.task;
      cfg.action = action;
      backend.kind = manifold_kind_from_string(kind);
      cfg.backend = backend;
      cfg.seed = seed;
      cfg.out = out;
      for (const ParamOpt& o : cmd.params) {
        if (subs[which]->count(o.flag) == 0) continue;
        cfg.params[o.key] = o.type == 'b' ? json(flags[o.key]) : convert(o, raw[o.key]);
      }
    }
    const RunRecord rec = dispatch(cfg);
    if (!cfg.out.empty()) write_record(rec, cfg.out);
    if (as_json || cfg.out.empty()) {
      json j = rec.to_json();
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << "wrote " << cfg.out << "\n";
    }
    for (const auto& w : rec.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
