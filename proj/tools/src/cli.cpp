#include "sbolza/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "sbolza/bolza.hpp"
#include "sbolza/characteristics.hpp"
#include "sbolza/io.hpp"
#include "sbolza/lcontrol.hpp"
#include "sbolza/oracleverify.hpp"
#include "sbolza/version.hpp"

namespace sbolza::cli {

namespace {

using io::json;
using io::ParseError;
using probspace::AdaptedProcess;
using probspace::Schedule;

struct RunConfig {
  double tol_stationarity = 1e-8;
  double tol_feasibility = 1e-10;
  double tol_certificate = 1e-6;
  double tol_gap = 1e-5;
  int max_iter = 200000;
  std::uint64_t seed = 42;
  std::string out;
  std::string format = "json";

  bolza::Config solver() const {
    bolza::Config c;
    c.tol_stationarity = tol_stationarity;
    c.tol_feasibility = tol_feasibility;
    c.tol_certificate = tol_certificate;
    c.tol_gap_strong = tol_gap;
    c.max_iter = max_iter;
    return c;
  }

  void validate() const {
    for (double t : {tol_stationarity, tol_feasibility, tol_certificate, tol_gap})
      if (!(t > 0.0)) throw ParseError("--tol", "tolerances must be positive");
    if (max_iter <= 0) throw ParseError("--max-iter", "must be positive");
    if (format != "json" && format != "csv") throw ParseError("--format", "expected json or csv");
  }

  json to_json() const {
    return {{"tol_stationarity", tol_stationarity},
            {"tol_feasibility", tol_feasibility},
            {"tol_certificate", tol_certificate},
            {"tol_gap", tol_gap},
            {"max_iter", max_iter},
            {"seed", seed},
            {"out", out},
            {"format", format}};
  }
};

struct Args {
  std::string input, trajectory, xi, eta;
  std::optional<int> start;
  int count = 1000;
  oracleverify::FuzzLimits limits;
};

struct Input {
  json doc;
  std::string kind;
  std::string hash;
};

Input load(const std::string& path) {
  if (path.empty()) throw ParseError("--input", "required");
  std::string raw;
  Input in;
  in.doc = io::read_file(path, &raw);
  io::check_version(in.doc);
  in.kind = io::kind_of(in.doc);
  in.hash = io::hex64(io::fnv1a(raw));
  return in;
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& flag) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError(flag, "not a number: '" + item + "'");
    }
  }
  if (vals.empty()) throw ParseError(flag, "empty vector");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void check_dim(const Eigen::VectorXd& v, int n, const std::string& flag) {
  if (v.size() != n) throw ParseError(flag, "expected " + std::to_string(n) + " components");
}

bolza::BolzaProblem bolza_input(const Input& in) {
  if (in.kind == "bolza") return io::bolza_from_json(in.doc);
  if (in.kind == "lc") return lcontrol::lc_to_bolza(io::lc_from_json(in.doc)).bolza;
  if (in.kind == "lq") return lcontrol::lc_to_bolza(io::lq_from_json(in.doc).to_lc()).bolza;
  throw ParseError("/kind", "expected bolza, lc or lq, got '" + in.kind + "'");
}

// Applies --xi and --start.
void apply_overrides(bolza::BolzaProblem& p, const Args& a) {
  if (!a.xi.empty()) {
    p.xi = parse_vector(a.xi, "--xi");
    check_dim(p.xi, p.n, "--xi");
  }
  if (a.start) {
    if (*a.start < p.tau() || *a.start > p.T()) throw ParseError("--start", "outside the horizon");
    p.start = *a.start;
  }
}

Eigen::VectorXd eta_arg(const Args& a, int n) {
  if (a.eta.empty()) throw ParseError("--eta", "required");
  Eigen::VectorXd eta = parse_vector(a.eta, "--eta");
  check_dim(eta, n, "--eta");
  return eta;
}

// Trajectory rows {t, atom, x, p}; x and p may start at different times.
std::pair<AdaptedProcess, AdaptedProcess> rows_to_processes(const json& rows, probspace::TreePtr tree, int n) {
  if (!rows.is_array() || rows.empty()) throw ParseError("/rows", "expected a non-empty array");
  const int T = tree->T(), na = tree->num_atoms();
  std::map<std::pair<int, int>, Eigen::VectorXd> xs, ps;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::string path = "/rows/" + std::to_string(k);
    const json& r = rows[k];
    if (!r.is_object() || !r.contains("t") || !r.contains("atom"))
      throw ParseError(path, "expected an object with t and atom");
    if (!r["t"].is_number_integer() || !r["atom"].is_number_integer()) throw ParseError(path, "t and atom must be integers");
    const int t = r["t"].get<int>(), a = r["atom"].get<int>();
    if (t < tree->tau() || t > T || a < 0 || a >= na) throw ParseError(path, "t or atom out of range");
    auto read = [&](const char* key, std::map<std::pair<int, int>, Eigen::VectorXd>& into) {
      if (!r.contains(key) || r[key].is_null()) return;
      const json& v = r[key];
      if (!v.is_array() || static_cast<int>(v.size()) != n) throw ParseError(path + "/" + key, "expected n numbers");
      Eigen::VectorXd val(n);
      for (int i = 0; i < n; ++i) val(i) = io::number_from(v[i], path + "/" + key + "/" + std::to_string(i));
      into[{t, a}] = val;
    };
    read("x", xs);
    read("p", ps);
  }
  auto build = [&](const std::map<std::pair<int, int>, Eigen::VectorXd>& m, Schedule sch, const char* name) {
    if (m.empty()) throw ParseError("/rows", std::string("no ") + name + " values");
    const int s = m.begin()->first.first;
    AdaptedProcess proc = AdaptedProcess::zeros(tree, n, s, sch);
    for (int t = s; t <= T; ++t)
      for (int a = 0; a < na; ++a) {
        const auto it = m.find({t, a});
        if (it == m.end())
          throw ParseError("/rows", std::string("missing ") + name + " at t=" + std::to_string(t) +
                                        " atom=" + std::to_string(a));
        proc.at(t).col(a) = it->second;
      }
    return proc;
  };
  return {build(xs, Schedule::primal, "x"), build(ps, Schedule::dual, "p")};
}

class Runner {
 public:
  Runner(std::string command, RunConfig cfg, Args args, std::ostream& out)
      : command_(std::move(command)), cfg_(std::move(cfg)), args_(std::move(args)), out_(out) {}

  int dispatch() {
    if (command_ == "solve") return solve();
    if (command_ == "dualize") return dualize();
    if (command_ == "dual-solve") return dual_solve();
    if (command_ == "duality") return duality();
    if (command_ == "check-characteristics") return check_characteristics();
    if (command_ == "subgrad") return subgrad();
    if (command_ == "lc-reduce") return lc_reduce();
    if (command_ == "lq") return lq();
    if (command_ == "fuzz") return fuzz();
    if (command_ == "assumptions") return assumptions();
    throw ParseError("command", "unknown subcommand '" + command_ + "'");
  }

 private:
  json arguments() const {
    json a;
    if (!args_.xi.empty()) a["xi"] = args_.xi;
    if (!args_.eta.empty()) a["eta"] = args_.eta;
    if (args_.start) a["start"] = *args_.start;
    if (command_ == "fuzz")
      a["fuzz"] = {{"count", args_.count},
                   {"max_atoms", args_.limits.max_atoms},
                   {"max_horizon", args_.limits.max_horizon},
                   {"max_n", args_.limits.max_n}};
    return a.is_null() ? json::object() : a;
  }

  json envelope(const json& result) const {
    json j;
    j["schema_version"] = io::kSchemaVersion;
    j["kind"] = "report";
    j["tool"] = {{"name", kToolName}, {"version", kVersion}};
    j["command"] = command_;
    j["config"] = cfg_.to_json();
    j["arguments"] = arguments();
    j["input_hash"] = hash_.empty() ? json(nullptr) : json(hash_);
    j["result"] = result;
    return j;
  }

  void write(const std::string& name, const std::string& text) {
    const std::filesystem::path path = std::filesystem::path(cfg_.out) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
  }

  // Report to stdout, or <command>.json under --out; csv goes alongside.
  void emit(const json& result, const std::string& csv = {}) {
    const std::string report = io::dump(envelope(result));
    if (cfg_.out.empty()) {
      out_ << (cfg_.format == "csv" && !csv.empty() ? csv : report);
      return;
    }
    write(command_ + ".json", report);
    if (!csv.empty()) write(command_ + ".csv", csv);
  }

  // Problem documents are written bare so they can be read back.
  void emit_document(const json& doc, const std::string& name) {
    if (cfg_.out.empty()) out_ << io::dump(doc);
    else write(name, io::dump(doc));
  }

  bolza::BolzaProblem primal_input() {
    const Input in = load(args_.input);
    hash_ = in.hash;
    bolza::BolzaProblem p = bolza_input(in);
    apply_overrides(p, args_);
    return p;
  }

  int solve() {
    const bolza::BolzaProblem p = primal_input();
    const bolza::SolveReport r = bolza::solve_primal(p, p.start, p.xi, cfg_.solver());
    std::string csv;
    if (r.trajectory && r.adjoint) csv = io::trajectory_csv(*r.trajectory, *r.adjoint);
    emit(io::to_json(r), csv);
    return r.status == qp::Status::max_iter ? kVerdictFail : kOk;
  }

  int dualize() {
    const bolza::BolzaProblem p = primal_input();
    emit_document(io::to_json(bolza::dualize(p)), "dual.json");
    return kOk;
  }

  int dual_solve() {
    const Input in = load(args_.input);
    hash_ = in.hash;
    bolza::DualBolzaProblem d;
    if (in.kind == "dual_bolza") {
      d = io::dual_from_json(in.doc);
    } else {
      bolza::BolzaProblem p = bolza_input(in);
      apply_overrides(p, args_);
      d = bolza::dualize(p);
      d.start = p.start;
    }
    if (!args_.eta.empty()) d.eta = eta_arg(args_, d.n);
    if (args_.start) d.start = *args_.start;
    const bolza::SolveReport r = bolza::solve_dual(d, d.start, d.eta, cfg_.solver());
    emit(io::to_json(r));
    return r.status == qp::Status::max_iter ? kVerdictFail : kOk;
  }

  int duality() {
    const bolza::BolzaProblem p = primal_input();
    const Eigen::VectorXd eta = eta_arg(args_, p.n);
    const bolza::DualityReport r = bolza::duality_report(p, p.start, p.xi, eta, cfg_.solver());
    emit(io::to_json(r));
    return r.weak_ok ? kOk : kVerdictFail;
  }

  int subgrad() {
    const bolza::BolzaProblem p = primal_input();
    const bolza::Config c = cfg_.solver();
    const bolza::SubgradResult r = bolza::value_and_subgradient(p, p.start, p.xi, c);
    const oracleverify::Objective V = [&](const Eigen::VectorXd& y) {
      return bolza::solve_primal(p, p.start, y, c).optimal_value;
    };
    const oracleverify::SlopeInterval fd = oracleverify::finite_diff_subgradient(V, p.xi);
    const bool in_interval = r.eta && fd.contains(*r.eta, 1e-7);
    json j = io::to_json(r);
    j["finite_difference"] = io::to_json(fd);
    j["certified"] = r.eta.has_value();
    j["in_slope_interval"] = in_interval;
    emit(j);
    return in_interval ? kOk : kVerdictFail;
  }

  int check_characteristics() {
    const Input in = load(args_.input);
    bolza::BolzaProblem p;
    characteristics::HamiltonianTrajectory traj;
    if (in.kind == "characteristics") {
      hash_ = in.hash;
      const json& pj = in.doc.at("problem");
      p = io::bolza_from_json(pj);
      traj.x = io::process_from_json(in.doc.at("x"), "/x", p.tree, Schedule::primal);
      traj.p = io::process_from_json(in.doc.at("p"), "/p", p.tree, Schedule::dual);
    } else {
      p = bolza_input(in);
      if (args_.trajectory.empty()) throw ParseError("--trajectory", "required unless the input is a bundle");
      std::string raw;
      const json tj = io::read_file(args_.trajectory, &raw);
      hash_ = io::hex64(io::fnv1a(in.hash + io::hex64(io::fnv1a(raw))));
      if (tj.is_object() && tj.contains("x") && tj.contains("p")) {
        traj.x = io::process_from_json(tj["x"], "/x", p.tree, Schedule::primal);
        traj.p = io::process_from_json(tj["p"], "/p", p.tree, Schedule::dual);
      } else {
        const json& rows = tj.is_object() && tj.contains("rows") ? tj["rows"] : tj;
        std::tie(traj.x, traj.p) = rows_to_processes(rows, p.tree, p.n);
      }
    }
    if (traj.x.dim != p.n || traj.p.dim != p.n) throw ParseError("/x", "dimension does not match the problem");
    const characteristics::TrajectoryVerdict v = characteristics::check_trajectory(p, traj, cfg_.tol_certificate);
    emit(io::to_json(v), io::trajectory_csv(traj.x, traj.p));
    return v.pass ? kOk : kVerdictFail;
  }

  int lc_reduce() {
    const Input in = load(args_.input);
    hash_ = in.hash;
    lcontrol::LCProblem lc;
    if (in.kind == "lc") lc = io::lc_from_json(in.doc);
    else if (in.kind == "lq") lc = io::lq_from_json(in.doc).to_lc();
    else throw ParseError("/kind", "expected lc or lq, got '" + in.kind + "'");
    if (!args_.xi.empty()) {
      lc.xi = parse_vector(args_.xi, "--xi");
      check_dim(lc.xi, lc.n, "--xi");
    }
    emit_document(io::to_json(lcontrol::lc_to_bolza(lc).bolza), "bolza.json");
    return kOk;
  }

  int lq() {
    const Input in = load(args_.input);
    hash_ = in.hash;
    if (in.kind != "lq") throw ParseError("/kind", "expected lq, got '" + in.kind + "'");
    lcontrol::LQProblem q = io::lq_from_json(in.doc);
    if (!args_.xi.empty()) {
      q.xi = parse_vector(args_.xi, "--xi");
      check_dim(q.xi, q.n, "--xi");
    }
    std::optional<Eigen::VectorXd> eta;
    if (!args_.eta.empty()) eta = eta_arg(args_, q.n);
    const lcontrol::LQSolution sol = lcontrol::lq_solve_characteristics(q, q.xi, eta);
    const std::string csv = io::trajectory_csv(sol.traj.x, sol.traj.p, &sol.u);
    const bool pass = sol.verdict.pass;
    if (cfg_.out.empty()) {
      out_ << (cfg_.format == "csv" ? csv : io::dump(envelope(io::to_json(sol))));
    } else {
      emit(io::to_json(sol), csv);
      bolza::BolzaProblem p = lcontrol::lc_to_bolza(q.to_lc()).bolza;
      write("characteristics.json", io::dump(io::characteristics_bundle(p, sol.traj)));
    }
    return pass ? kOk : kVerdictFail;
  }

  int fuzz() {
    const oracleverify::FuzzReport r = oracleverify::fuzz_weak_duality(cfg_.seed, args_.count, args_.limits);
    if (!cfg_.out.empty())
      for (const auto& f : r.failures)
        write("fuzz_failure_" + std::to_string(f.index) + ".json", io::dump(io::to_json(f.instance.problem)));
    emit(io::to_json(r));
    return r.violations == 0 ? kOk : kVerdictFail;
  }

  int assumptions() {
    const Input in = load(args_.input);
    hash_ = in.hash;
    lcontrol::AssumptionOptions o;
    o.seed = cfg_.seed;
    lcontrol::AssumptionReport r;
    if (in.kind == "lc" || in.kind == "lq") {
      lcontrol::LCProblem lc = in.kind == "lc" ? io::lc_from_json(in.doc) : io::lq_from_json(in.doc).to_lc();
      if (!args_.xi.empty()) {
        lc.xi = parse_vector(args_.xi, "--xi");
        check_dim(lc.xi, lc.n, "--xi");
      }
      r = lcontrol::check_assumptions(lc, o);
    } else {
      bolza::BolzaProblem p = bolza_input(in);
      apply_overrides(p, args_);
      r = lcontrol::check_assumptions(p, o);
    }
    emit(io::to_json(r));
    for (const auto& c : r.checks)
      if (c.status == lcontrol::Verdict::fail) return kVerdictFail;
    return kOk;
  }

  std::string command_;
  RunConfig cfg_;
  Args args_;
  std::ostream& out_;
  std::string hash_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic Bolza problems: primal and dual solves, characteristics, LC/LQ control", kToolName};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  RunConfig cfg;
  Args a;
  int start = 0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve", "Solve the primal problem from E x_s = xi"},
      {"dualize", "Write the dual problem"},
      {"dual-solve", "Solve the dual problem from -E p_s = eta"},
      {"duality", "Compare V_s(xi) and W_s(eta)"},
      {"check-characteristics", "Verify a state/adjoint trajectory"},
      {"subgrad", "Value and certified subgradient, checked by finite differences"},
      {"lc-reduce", "Rewrite a linear-convex problem in Bolza form"},
      {"lq", "Solve a linear-quadratic problem through its characteristic system"},
      {"fuzz", "Weak-duality fuzzing on random instances"},
      {"assumptions", "Check the qualification conditions"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--input", a.input, "problem JSON");
    s->add_option("--xi", a.xi, "initial mean, comma separated");
    s->add_option("--eta", a.eta, "dual initial value, comma separated");
    s->add_option("--start", start, "start time s");
    s->add_option("--tol-stationarity", cfg.tol_stationarity);
    s->add_option("--tol-feasibility", cfg.tol_feasibility);
    s->add_option("--tol-certificate", cfg.tol_certificate);
    s->add_option("--tol-gap", cfg.tol_gap, "largest gap still labelled strong");
    s->add_option("--max-iter", cfg.max_iter);
    s->add_option("--seed", cfg.seed);
    s->add_option("--out", cfg.out, "output directory");
    s->add_option("--format", cfg.format, "json or csv");
    if (name == "check-characteristics") s->add_option("--trajectory", a.trajectory, "trajectory JSON");
    if (name == "fuzz") {
      s->add_option("--count", a.count);
      s->add_option("--max-atoms", a.limits.max_atoms);
      s->add_option("--max-horizon", a.limits.max_horizon);
      s->add_option("--max-n", a.limits.max_n);
    }
    subs.push_back(s);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--start")) a.start = start;
  // The trajectory table is what lq is usually run for.
  if (chosen->get_name() == "lq" && !chosen->count("--format")) cfg.format = "csv";
  try {
    cfg.validate();
    if (!cfg.out.empty()) std::filesystem::create_directories(cfg.out);
    Runner r(chosen->get_name(), cfg, a, out);
    return r.dispatch();
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const io::json::exception& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::domain_error& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kVerdictFail;
  }
}

}  // namespace sbolza::cli
