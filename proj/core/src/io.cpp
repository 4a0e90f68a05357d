#include "sbolza/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace sbolza::io {

namespace {

using convexcalc::ProjectedConvex;
using convexcalc::SetDescriptor;
using convexcalc::StructuredConvex;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using probspace::AdaptedProcess;
using probspace::Schedule;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string sub(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string sub(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

const json& at(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ParseError(sub(path, key), "missing");
  return *it;
}

const json& array_at(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  return j;
}

int int_from(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<int>();
}

VectorXd vector_from(const json& j, const std::string& path) {
  if (j.is_number() || j.is_string()) return VectorXd::Constant(1, number_from(j, path));
  array_at(j, path);
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = number_from(j[i], sub(path, i));
  return v;
}

// Row-major nested arrays; a bare number is a 1x1 matrix.
MatrixXd matrix_from(const json& j, const std::string& path) {
  if (j.is_number() || j.is_string()) return MatrixXd::Constant(1, 1, number_from(j, path));
  array_at(j, path);
  if (j.empty()) return MatrixXd(0, 0);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 1;
  MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const VectorXd row = vector_from(j[r], sub(path, r));
    if (static_cast<std::size_t>(row.size()) != cols) throw ParseError(sub(path, r), "ragged matrix row");
    M.row(r) = row.transpose();
  }
  return M;
}

template <class F>
auto rethrow(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(path, e.what());
  }
}

json header(const std::string& kind) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  return j;
}

// Function table that stores each shared function once.
struct FnTable {
  json list = json::array();
  std::map<const ProjectedConvex*, int> ids;
  int add(const std::shared_ptr<const ProjectedConvex>& f) {
    const auto it = ids.find(f.get());
    if (it != ids.end()) return it->second;
    const int id = static_cast<int>(list.size());
    list.push_back(to_json(*f));
    ids[f.get()] = id;
    return id;
  }
};

std::vector<std::shared_ptr<const ProjectedConvex>> read_table(const json& j, const std::string& path) {
  std::vector<std::shared_ptr<const ProjectedConvex>> out;
  if (!j.contains("functions")) return out;
  const json& arr = array_at(j["functions"], sub(path, "functions"));
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(std::make_shared<const ProjectedConvex>(projected_from_json(arr[i], sub(sub(path, "functions"), i))));
  return out;
}

std::shared_ptr<const ProjectedConvex> fn_ref(const json& j, const std::string& path,
                                              const std::vector<std::shared_ptr<const ProjectedConvex>>& table) {
  if (j.is_number_integer()) {
    const int id = j.get<int>();
    if (id < 0 || id >= static_cast<int>(table.size())) throw ParseError(path, "function index out of range");
    return table[id];
  }
  return std::make_shared<const ProjectedConvex>(projected_from_json(j, path));
}

// Stage functions: one entry per stage, each a single function for every
// atom or an array with one per atom.
std::vector<std::vector<bolza::FnPtr>> stages_from(const json& j, const std::string& path, int stages, int atoms,
                                                   const std::vector<std::shared_ptr<const ProjectedConvex>>& table) {
  array_at(j, path);
  if (static_cast<int>(j.size()) != stages) throw ParseError(path, "expected one entry per stage");
  std::vector<std::vector<bolza::FnPtr>> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string pk = sub(path, k);
    std::vector<bolza::FnPtr> row;
    if (j[k].is_array()) {
      if (static_cast<int>(j[k].size()) != atoms) throw ParseError(pk, "expected one function per atom");
      for (std::size_t a = 0; a < j[k].size(); ++a) row.push_back(fn_ref(j[k][a], sub(pk, a), table));
    } else {
      row.assign(atoms, fn_ref(j[k], pk, table));
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<probspace::NoiseSample> samples_from(const json& j, const std::string& path) {
  const json& arr = array_at(at(j, "samples", path), sub(path, "samples"));
  std::vector<probspace::NoiseSample> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string pi = sub(sub(path, "samples"), i);
    out.push_back({vector_from(at(arr[i], "w", pi), sub(pi, "w")), number_from(at(arr[i], "prob", pi), sub(pi, "prob"))});
  }
  return out;
}

json samples_to(const std::vector<probspace::NoiseSample>& s) {
  json arr = json::array();
  for (const auto& x : s) arr.push_back({{"w", to_json(x.value)}, {"prob", number(x.weight)}});
  return arr;
}

std::vector<std::vector<probspace::NoiseSample>> noise_from(const json& j, const std::string& path, int tau, int T) {
  const json& arr = array_at(j, path);
  std::vector<std::vector<probspace::NoiseSample>> out(T - tau);
  std::vector<bool> seen(T - tau, false);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string pi = sub(path, i);
    const int t = int_from(at(arr[i], "t", pi), sub(pi, "t"));
    if (t < tau || t >= T) throw ParseError(sub(pi, "t"), "noise time outside [tau, T-1]");
    if (seen[t - tau]) throw ParseError(sub(pi, "t"), "duplicate noise time");
    seen[t - tau] = true;
    out[t - tau] = samples_from(arr[i], pi);
  }
  for (int k = 0; k < T - tau; ++k)
    if (!seen[k]) throw ParseError(path, "no noise given for time " + std::to_string(tau + k));
  return out;
}

json noise_to(const std::vector<std::vector<probspace::NoiseSample>>& noise, int tau) {
  json arr = json::array();
  for (std::size_t k = 0; k < noise.size(); ++k)
    arr.push_back({{"t", tau + static_cast<int>(k)}, {"samples", samples_to(noise[k])}});
  return arr;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json parse(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << "malformed JSON at byte " << e.byte << ": " << e.what();
    throw ParseError(source, os.str());
  }
}

json read_file(const std::string& path, std::string* raw) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (raw) *raw = text;
  return parse(text, path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void check_version(const json& j) {
  const int v = int_from(at(j, "schema_version", ""), "/schema_version");
  if (v != kSchemaVersion)
    throw ParseError("/schema_version", "unsupported schema version " + std::to_string(v) + ", expected " +
                                            std::to_string(kSchemaVersion));
}

std::string kind_of(const json& j) {
  const json& k = at(j, "kind", "");
  if (!k.is_string()) throw ParseError("/kind", "expected a string");
  return k.get<std::string>();
}

json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

double number_from(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ParseError(path, "expected a number");
}

json to_json(const ExtReal& v) { return number(v.as_double()); }

json to_json(const VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(number(v(i)));
  return arr;
}

json to_json(const MatrixXd& m) {
  json arr = json::array();
  for (int r = 0; r < m.rows(); ++r) arr.push_back(to_json(VectorXd(m.row(r).transpose())));
  return arr;
}

json to_json(const SetDescriptor& s) {
  switch (s.kind) {
    case SetDescriptor::Kind::all: return {{"kind", "all"}};
    case SetDescriptor::Kind::box: return {{"kind", "box"}, {"lower", to_json(s.lower)}, {"upper", to_json(s.upper)}};
    case SetDescriptor::Kind::affine: return {{"kind", "affine"}, {"A", to_json(s.A)}, {"b", to_json(s.b)}};
    case SetDescriptor::Kind::polyhedron: return {{"kind", "polyhedron"}, {"A", to_json(s.A)}, {"b", to_json(s.b)}};
    case SetDescriptor::Kind::intersection: {
      json parts = json::array();
      for (const auto& p : s.parts) parts.push_back(to_json(p));
      return {{"kind", "intersection"}, {"parts", parts}};
    }
  }
  return {};
}

SetDescriptor set_from_json(const json& j, const std::string& path) {
  const json& k = at(j, "kind", path);
  if (!k.is_string()) throw ParseError(sub(path, "kind"), "expected a string");
  const std::string kind = k.get<std::string>();
  return rethrow(path, [&]() -> SetDescriptor {
    if (kind == "all") return SetDescriptor::all();
    if (kind == "box")
      return SetDescriptor::box(vector_from(at(j, "lower", path), sub(path, "lower")),
                                vector_from(at(j, "upper", path), sub(path, "upper")));
    if (kind == "affine" || kind == "polyhedron") {
      const MatrixXd A = matrix_from(at(j, "A", path), sub(path, "A"));
      const VectorXd b = vector_from(at(j, "b", path), sub(path, "b"));
      return kind == "affine" ? SetDescriptor::affine(A, b) : SetDescriptor::polyhedron(A, b);
    }
    if (kind == "intersection") {
      const json& arr = array_at(at(j, "parts", path), sub(path, "parts"));
      std::vector<SetDescriptor> parts;
      for (std::size_t i = 0; i < arr.size(); ++i) parts.push_back(set_from_json(arr[i], sub(sub(path, "parts"), i)));
      return SetDescriptor::intersection(std::move(parts));
    }
    throw ParseError(sub(path, "kind"), "unknown set kind '" + kind + "'");
  });
}

json to_json(const StructuredConvex& f) {
  return {{"quad", to_json(f.quad())}, {"lin", to_json(f.lin())}, {"const", number(f.constant())},
          {"domain", to_json(f.domain())}};
}

StructuredConvex structured_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected a function object");
  const MatrixXd Q = matrix_from(at(j, "quad", path), sub(path, "quad"));
  const VectorXd lin = j.contains("lin") ? vector_from(j["lin"], sub(path, "lin")) : VectorXd::Zero(Q.rows());
  const double c = j.contains("const") ? number_from(j["const"], sub(path, "const")) : 0.0;
  const SetDescriptor dom = j.contains("domain") ? set_from_json(j["domain"], sub(path, "domain")) : SetDescriptor::all();
  return rethrow(path, [&] { return StructuredConvex(Q, lin, c, dom); });
}

json to_json(const ProjectedConvex& f) {
  json j = to_json(f.phi());
  j["kept"] = f.dim();
  return j;
}

ProjectedConvex projected_from_json(const json& j, const std::string& path) {
  StructuredConvex phi = structured_from_json(j, path);
  const int kept = j.contains("kept") ? int_from(j["kept"], sub(path, "kept")) : phi.dim();
  return rethrow(path, [&] { return ProjectedConvex(std::move(phi), kept); });
}

json to_json(const probspace::ScenarioTree& tree) {
  json j;
  j["tau"] = tree.tau();
  j["prob"] = json::array();
  for (double p : tree.probs()) j["prob"].push_back(number(p));
  json parts = json::array();
  for (int t = tree.tau(); t <= tree.T(); ++t) parts.push_back(tree.partition(t));
  j["partitions"] = parts;
  if (tree.has_noise()) {
    json noise = json::array();
    for (int a = 0; a < tree.num_atoms(); ++a) {
      json path = json::array();
      for (int k = 0; k < tree.num_noise_stages(); ++k) path.push_back(to_json(tree.noise(a, k)));
      noise.push_back(path);
    }
    j["noise"] = noise;
  }
  return j;
}

probspace::TreePtr tree_from_json(const json& j, const std::string& path) {
  const int tau = int_from(at(j, "tau", path), sub(path, "tau"));
  if (j.contains("stages")) {
    // Product tree from independent noise stages.
    const json& arr = array_at(j["stages"], sub(path, "stages"));
    std::vector<std::vector<probspace::NoiseSample>> stages;
    for (std::size_t i = 0; i < arr.size(); ++i) stages.push_back(samples_from(arr[i], sub(sub(path, "stages"), i)));
    return rethrow(path, [&] { return std::make_shared<const probspace::ScenarioTree>(probspace::build_tree(stages, tau)); });
  }
  const VectorXd prob = vector_from(at(j, "prob", path), sub(path, "prob"));
  const json& parts = array_at(at(j, "partitions", path), sub(path, "partitions"));
  std::vector<probspace::Partition> partitions;
  for (std::size_t t = 0; t < parts.size(); ++t) {
    const std::string pt = sub(sub(path, "partitions"), t);
    probspace::Partition part;
    for (std::size_t c = 0; c < array_at(parts[t], pt).size(); ++c) {
      probspace::Cell cell;
      for (std::size_t a = 0; a < array_at(parts[t][c], sub(pt, c)).size(); ++a)
        cell.push_back(int_from(parts[t][c][a], sub(sub(pt, c), a)));
      part.push_back(cell);
    }
    partitions.push_back(part);
  }
  return rethrow(path, [&] {
    probspace::ScenarioTree tree(std::vector<double>(prob.data(), prob.data() + prob.size()), tau, partitions);
    if (j.contains("noise")) {
      const json& nz = array_at(j["noise"], sub(path, "noise"));
      std::vector<std::vector<VectorXd>> noise;
      for (std::size_t a = 0; a < nz.size(); ++a) {
        std::vector<VectorXd> row;
        for (std::size_t k = 0; k < array_at(nz[a], sub(sub(path, "noise"), a)).size(); ++k)
          row.push_back(vector_from(nz[a][k], sub(sub(sub(path, "noise"), a), k)));
        noise.push_back(row);
      }
      tree.set_noise(noise);
    }
    return std::make_shared<const probspace::ScenarioTree>(std::move(tree));
  });
}

json to_json(const bolza::BolzaProblem& p) {
  json j = header("bolza");
  FnTable table;
  json L = json::array();
  for (const auto& row : p.lagrangians) {
    json r = json::array();
    for (const auto& f : row) r.push_back(table.add(f));
    L.push_back(r);
  }
  j["lagrangians"] = L;
  j["terminal"] = table.add(p.terminal);
  j["functions"] = table.list;
  j["tree"] = to_json(*p.tree);
  j["n"] = p.n;
  j["xi"] = to_json(p.xi);
  j["start"] = p.start;
  return j;
}

bolza::BolzaProblem bolza_from_json(const json& j) {
  check_version(j);
  bolza::BolzaProblem p;
  p.tree = tree_from_json(at(j, "tree", ""), "/tree");
  p.n = int_from(at(j, "n", ""), "/n");
  const auto table = read_table(j, "");
  p.lagrangians = stages_from(at(j, "lagrangians", ""), "/lagrangians", p.T() - p.tau(), p.tree->num_atoms(), table);
  p.terminal = fn_ref(at(j, "terminal", ""), "/terminal", table);
  p.xi = j.contains("xi") ? vector_from(j["xi"], "/xi") : VectorXd::Zero(p.n);
  p.start = j.contains("start") ? int_from(j["start"], "/start") : p.tau();
  if (p.xi.size() != p.n) throw ParseError("/xi", "expected " + std::to_string(p.n) + " entries");
  rethrow("", [&] {
    p.validate();
    return 0;
  });
  return p;
}

json to_json(const bolza::DualBolzaProblem& d) {
  json j = header("dual_bolza");
  FnTable table;
  json M = json::array();
  for (const auto& row : d.dual_lagrangians) {
    json r = json::array();
    for (const auto& f : row) r.push_back(table.add(f));
    M.push_back(r);
  }
  j["dual_lagrangians"] = M;
  j["dual_terminal"] = table.add(d.dual_terminal);
  j["functions"] = table.list;
  j["tree"] = to_json(*d.tree);
  j["n"] = d.n;
  j["eta"] = to_json(d.eta);
  j["start"] = d.start;
  json fl = json::array();
  for (const auto& [t, a] : d.flagged) fl.push_back({{"t", t}, {"atom", a}});
  j["flagged"] = fl;
  return j;
}

bolza::DualBolzaProblem dual_from_json(const json& j) {
  check_version(j);
  bolza::DualBolzaProblem d;
  d.tree = tree_from_json(at(j, "tree", ""), "/tree");
  d.n = int_from(at(j, "n", ""), "/n");
  const auto table = read_table(j, "");
  d.dual_lagrangians =
      stages_from(at(j, "dual_lagrangians", ""), "/dual_lagrangians", d.T() - d.tau(), d.tree->num_atoms(), table);
  d.dual_terminal = fn_ref(at(j, "dual_terminal", ""), "/dual_terminal", table);
  d.eta = j.contains("eta") ? vector_from(j["eta"], "/eta") : VectorXd::Zero(d.n);
  d.start = j.contains("start") ? int_from(j["start"], "/start") : d.tau();
  return d;
}

namespace {

template <class T, class F>
std::vector<T> per_stage(const json& j, const std::string& key, int H, const std::string& path, F&& parse_one,
                         const T& fallback) {
  if (!j.contains(key)) return std::vector<T>(H, fallback);
  const json& v = j[key];
  const std::string pk = sub(path, key);
  if (v.is_array() && !v.empty() && v[0].is_object()) {
    if (static_cast<int>(v.size()) != H) throw ParseError(pk, "expected one entry per step");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(parse_one(v[i], sub(pk, i)));
    return out;
  }
  return std::vector<T>(H, parse_one(v, pk));
}

void horizon_from(const json& j, int& tau, int& T) {
  const json& h = at(j, "horizon", "");
  tau = int_from(at(h, "tau", "/horizon"), "/horizon/tau");
  T = int_from(at(h, "T", "/horizon"), "/horizon/T");
  if (T <= tau) throw ParseError("/horizon", "T must exceed tau");
}

}  // namespace

json to_json(const lcontrol::LCProblem& lc) {
  json j = header("lc");
  j["n"] = lc.n;
  j["m"] = lc.m;
  j["A"] = to_json(lc.A);
  j["B"] = to_json(lc.B);
  j["horizon"] = {{"tau", lc.tau}, {"T", lc.T}};
  json l = json::array(), U = json::array(), X = json::array(), D = json::array();
  for (int k = 0; k < lc.horizon(); ++k) {
    l.push_back(to_json(lc.stage_costs[k]));
    U.push_back(to_json(lc.controls[k]));
    X.push_back(to_json(lc.states[k]));
    D.push_back(to_json(lc.mixed[k]));
  }
  j["stage_costs"] = l;
  j["U"] = U;
  j["X"] = X;
  j["mixed"] = D;
  j["terminal"] = to_json(lc.terminal);
  j["noise"] = noise_to(lc.noise, lc.tau);
  if (!lc.gamma.empty()) j["gamma"] = {{"samples", samples_to(lc.gamma)}};
  j["xi"] = to_json(lc.xi);
  return j;
}

lcontrol::LCProblem lc_from_json(const json& j) {
  check_version(j);
  lcontrol::LCProblem lc;
  lc.n = int_from(at(j, "n", ""), "/n");
  lc.m = int_from(at(j, "m", ""), "/m");
  lc.A = matrix_from(at(j, "A", ""), "/A");
  lc.B = matrix_from(at(j, "B", ""), "/B");
  horizon_from(j, lc.tau, lc.T);
  const int H = lc.T - lc.tau;
  const int n = lc.n, m = lc.m;
  lc.stage_costs = per_stage<StructuredConvex>(j, "stage_costs", H, "", structured_from_json,
                                               StructuredConvex::zero(n + m));
  lc.controls = per_stage<SetDescriptor>(j, "U", H, "", set_from_json, SetDescriptor::all());
  lc.states = per_stage<SetDescriptor>(j, "X", H, "", set_from_json, SetDescriptor::all());
  lc.mixed = per_stage<SetDescriptor>(j, "mixed", H, "", set_from_json, SetDescriptor::all());
  lc.terminal = j.contains("terminal") ? structured_from_json(j["terminal"], "/terminal") : StructuredConvex::zero(n);
  lc.noise = noise_from(at(j, "noise", ""), "/noise", lc.tau, lc.T);
  if (j.contains("gamma")) lc.gamma = samples_from(j["gamma"], "/gamma");
  lc.xi = vector_from(at(j, "xi", ""), "/xi");
  if (lc.xi.size() != lc.n) throw ParseError("/xi", "expected " + std::to_string(lc.n) + " entries");
  rethrow("", [&] {
    lc.validate();
    return 0;
  });
  return lc;
}

json to_json(const lcontrol::LQProblem& lq) {
  json j = header("lq");
  j["n"] = lq.n;
  j["m"] = lq.m;
  j["A"] = to_json(lq.A);
  j["B"] = to_json(lq.B);
  j["P"] = to_json(lq.P);
  j["R"] = to_json(lq.R);
  j["Q"] = to_json(lq.Q);
  j["horizon"] = {{"tau", lq.tau}, {"T", lq.T}};
  j["X"] = {{"lower", to_json(lq.x_lo)}, {"upper", to_json(lq.x_hi)}};
  j["noise"] = noise_to(lq.noise, lq.tau);
  if (!lq.gamma.empty()) j["gamma"] = {{"samples", samples_to(lq.gamma)}};
  j["xi"] = to_json(lq.xi);
  return j;
}

lcontrol::LQProblem lq_from_json(const json& j) {
  check_version(j);
  lcontrol::LQProblem lq;
  lq.n = int_from(at(j, "n", ""), "/n");
  lq.m = int_from(at(j, "m", ""), "/m");
  lq.A = matrix_from(at(j, "A", ""), "/A");
  lq.B = matrix_from(at(j, "B", ""), "/B");
  lq.P = matrix_from(at(j, "P", ""), "/P");
  lq.R = matrix_from(at(j, "R", ""), "/R");
  lq.Q = matrix_from(at(j, "Q", ""), "/Q");
  horizon_from(j, lq.tau, lq.T);
  const json& X = at(j, "X", "");
  lq.x_lo = vector_from(at(X, "lower", "/X"), "/X/lower");
  lq.x_hi = vector_from(at(X, "upper", "/X"), "/X/upper");
  lq.noise = noise_from(at(j, "noise", ""), "/noise", lq.tau, lq.T);
  if (j.contains("gamma")) lq.gamma = samples_from(j["gamma"], "/gamma");
  lq.xi = j.contains("xi") ? vector_from(j["xi"], "/xi") : VectorXd::Zero(lq.n);
  if (lq.xi.size() != lq.n) throw ParseError("/xi", "expected " + std::to_string(lq.n) + " entries");
  rethrow("", [&] {
    lq.validate();
    return 0;
  });
  return lq;
}

json to_json(const AdaptedProcess& x) {
  json j;
  j["s"] = x.s;
  j["dim"] = x.dim;
  j["schedule"] = x.schedule == Schedule::primal ? "primal" : "dual";
  json vals = json::array();
  for (const auto& v : x.values) vals.push_back(to_json(MatrixXd(v.transpose())));
  j["values"] = vals;
  return j;
}

AdaptedProcess process_from_json(const json& j, const std::string& path, probspace::TreePtr tree, Schedule schedule) {
  AdaptedProcess x;
  x.tree = tree;
  x.s = int_from(at(j, "s", path), sub(path, "s"));
  x.dim = int_from(at(j, "dim", path), sub(path, "dim"));
  x.schedule = schedule;
  const json& vals = array_at(at(j, "values", path), sub(path, "values"));
  if (static_cast<int>(vals.size()) != tree->T() - x.s + 1) throw ParseError(sub(path, "values"), "wrong window length");
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const std::string pk = sub(sub(path, "values"), k);
    const MatrixXd M = matrix_from(vals[k], pk);
    if (M.rows() != tree->num_atoms() || M.cols() != x.dim) throw ParseError(pk, "expected one row per atom");
    x.values.push_back(M.transpose());
  }
  return x;
}

json to_json(const bolza::SolveReport& r) {
  json j;
  j["optimal_value"] = to_json(r.optimal_value);
  j["status"] = qp::to_string(r.status);
  j["iterations"] = r.iterations;
  j["residuals"] = {{"stationarity", number(r.stationarity_residual)},
                    {"feasibility", number(r.feasibility_residual)}};
  json tr = json::array();
  for (double v : r.objective_trace) tr.push_back(number(v));
  j["objective_trace"] = tr;
  j["trajectory"] = r.trajectory ? to_json(*r.trajectory) : json(nullptr);
  if (r.adjoint) j["adjoint"] = to_json(*r.adjoint);
  if (r.mean_multiplier.size() > 0) j["mean_multiplier"] = to_json(r.mean_multiplier);
  return j;
}

json to_json(const bolza::DualityReport& r) {
  json j;
  j["V"] = to_json(r.V);
  j["W"] = to_json(r.W);
  j["gap"] = number(r.gap);
  j["weak_ok"] = r.weak_ok;
  j["strong"] = r.strong;
  j["label"] = r.strong ? "strong" : "weak only";
  if (r.pair_slack) j["pair_slack"] = number(*r.pair_slack);
  return j;
}

json to_json(const bolza::SubgradResult& r) {
  json j;
  j["value"] = to_json(r.value);
  j["eta"] = r.eta ? to_json(*r.eta) : json(nullptr);
  j["candidate"] = to_json(r.candidate);
  j["dual_value"] = to_json(r.dual_value);
  j["residual"] = number(r.residual);
  j["certified"] = r.eta.has_value();
  return j;
}

json to_json(const bolza::TiltResult& r) {
  return {{"value", to_json(r.value)}, {"dual_value", to_json(r.dual_value)}, {"mismatch", number(r.mismatch)},
          {"consistent", r.consistent}};
}

json to_json(const characteristics::TrajectoryVerdict& v) {
  json j;
  j["pass"] = v.pass;
  j["x_adapted"] = v.x_adapted;
  j["p_adapted"] = v.p_adapted;
  j["x_deviation"] = number(v.x_deviation);
  j["p_deviation"] = number(v.p_deviation);
  json st = json::array();
  for (double r : v.stage_residuals) st.push_back(number(r));
  j["stage_residuals"] = st;
  j["transversality_residual"] = number(v.transversality_residual);
  j["tol"] = number(v.tol);
  j["failure"] = v.failure;
  return j;
}

json to_json(const characteristics::SubgradCertificate& c) {
  json j;
  j["s"] = c.s;
  j["xi"] = to_json(c.xi);
  j["eta"] = to_json(c.eta);
  j["V"] = to_json(c.V);
  j["W"] = to_json(c.W);
  j["fy_gap"] = number(c.fy_gap);
  j["fd_left"] = to_json(c.fd_left);
  j["fd_right"] = to_json(c.fd_right);
  j["one_sided"] = c.one_sided;
  j["fy_pass"] = c.fy_pass;
  j["fd_pass"] = c.fd_pass;
  j["flagged"] = c.flagged;
  return j;
}

json to_json(const oracleverify::GridResult& r) {
  return {{"value", to_json(r.value)}, {"argmin", to_json(r.argmin)}, {"accuracy", number(r.accuracy)},
          {"evaluations", r.evaluations}};
}

json to_json(const oracleverify::SlopeInterval& s) {
  return {{"left", to_json(s.left)}, {"right", to_json(s.right)}, {"one_sided", s.one_sided}};
}

json to_json(const oracleverify::FuzzReport& r) {
  json j;
  j["seed"] = r.seed;
  j["count"] = r.count;
  j["limits"] = {{"max_atoms", r.limits.max_atoms}, {"max_horizon", r.limits.max_horizon}, {"max_n", r.limits.max_n}};
  j["violations"] = r.violations;
  j["skipped"] = r.skipped;
  j["min_slack"] = number(r.min_slack);
  json fails = json::array();
  for (const auto& f : r.failures) {
    json c;
    c["index"] = f.index;
    c["slack"] = number(f.slack);
    c["problem"] = to_json(f.instance.problem);
    c["x"] = to_json(f.instance.x);
    c["p"] = to_json(f.instance.p);
    fails.push_back(c);
  }
  j["failures"] = fails;
  return j;
}

json to_json(const lcontrol::AssumptionReport& r) {
  json arr = json::array();
  for (const auto& c : r.checks) {
    json nums = json::object();
    for (const auto& [k, v] : c.numbers) nums[k] = number(v);
    arr.push_back({{"name", c.name}, {"status", lcontrol::to_string(c.status)}, {"evidence", c.evidence},
                   {"numbers", nums}});
  }
  return {{"checks", arr}};
}

json to_json(const lcontrol::LQSolution& s) {
  json j;
  j["value"] = number(s.value);
  j["degenerate"] = s.degenerate;
  j["system_residual"] = number(s.system_residual);
  j["transversality_error"] = number(s.transversality_error);
  j["control_error"] = number(s.control_error);
  j["x_tau_interior"] = s.x_tau_interior;
  j["verdict"] = to_json(s.verdict);
  j["x"] = to_json(s.traj.x);
  j["p"] = to_json(s.traj.p);
  j["u"] = to_json(s.u);
  return j;
}

json to_json(const lcontrol::ControlProcess& c) {
  return {{"u", to_json(c.u)},
          {"adapted", c.adaptedness.adapted},
          {"adapted_deviation", number(c.adaptedness.deviation)},
          {"lc_cost", to_json(c.lc_cost)},
          {"bolza_cost", to_json(c.bolza_cost)},
          {"mismatch", number(c.mismatch)}};
}

json characteristics_bundle(const bolza::BolzaProblem& p, const characteristics::HamiltonianTrajectory& traj) {
  json j = header("characteristics");
  j["problem"] = to_json(p);
  j["x"] = to_json(traj.x);
  j["p"] = to_json(traj.p);
  return j;
}

std::string trajectory_csv(const AdaptedProcess& x, const AdaptedProcess& p, const AdaptedProcess* u) {
  std::ostringstream os;
  os << "t,atom,prob";
  for (int i = 0; i < x.dim; ++i) os << ",x" << i;
  for (int i = 0; i < p.dim; ++i) os << ",p" << i;
  if (u)
    for (int i = 0; i < u->dim; ++i) os << ",u" << i;
  os << "\n";
  const auto& tree = *x.tree;
  for (int t = x.s; t <= x.T(); ++t)
    for (int a = 0; a < tree.num_atoms(); ++a) {
      os << t << "," << a << "," << fmt(tree.prob(a));
      for (int i = 0; i < x.dim; ++i) os << "," << fmt(x.at(t)(i, a));
      for (int i = 0; i < p.dim; ++i) os << "," << fmt(p.at(t)(i, a));
      if (u)
        for (int i = 0; i < u->dim; ++i) os << "," << (t <= u->T() ? fmt(u->at(t)(i, a)) : "");
      os << "\n";
    }
  return os.str();
}

}  // namespace sbolza::io
