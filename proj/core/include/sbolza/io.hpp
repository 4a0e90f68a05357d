#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <string_view>

#include "sbolza/bolza.hpp"
#include "sbolza/characteristics.hpp"
#include "sbolza/lcontrol.hpp"
#include "sbolza/oracleverify.hpp"

// JSON and CSV forms of problems, processes and reports. Infinite numbers
// are written as the strings "inf" and "-inf"; keys come out sorted.
namespace sbolza::io {

using json = nlohmann::json;
inline constexpr int kSchemaVersion = 1;

// Schema or syntax problem; the message starts with the JSON path.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, const std::string& msg)
      : std::runtime_error(path.empty() ? msg : path + ": " + msg), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t h);

// Parses text, reporting the byte offset of syntax errors.
json parse(const std::string& text, const std::string& source = "input");
json read_file(const std::string& path, std::string* raw = nullptr);
std::string dump(const json& j);
// Throws ParseError unless schema_version matches.
void check_version(const json& j);
std::string kind_of(const json& j);

json number(double v);
double number_from(const json& j, const std::string& path);
json to_json(const ExtReal& v);
json to_json(const Eigen::VectorXd& v);
json to_json(const Eigen::MatrixXd& m);

json to_json(const convexcalc::SetDescriptor& s);
convexcalc::SetDescriptor set_from_json(const json& j, const std::string& path);
json to_json(const convexcalc::StructuredConvex& f);
convexcalc::StructuredConvex structured_from_json(const json& j, const std::string& path);
json to_json(const convexcalc::ProjectedConvex& f);
convexcalc::ProjectedConvex projected_from_json(const json& j, const std::string& path);

json to_json(const probspace::ScenarioTree& tree);
probspace::TreePtr tree_from_json(const json& j, const std::string& path);

json to_json(const bolza::BolzaProblem& p);
bolza::BolzaProblem bolza_from_json(const json& j);
json to_json(const bolza::DualBolzaProblem& d);
bolza::DualBolzaProblem dual_from_json(const json& j);

json to_json(const lcontrol::LCProblem& lc);
lcontrol::LCProblem lc_from_json(const json& j);
json to_json(const lcontrol::LQProblem& lq);
lcontrol::LQProblem lq_from_json(const json& j);

json to_json(const probspace::AdaptedProcess& x);
probspace::AdaptedProcess process_from_json(const json& j, const std::string& path, probspace::TreePtr tree,
                                            probspace::Schedule schedule);

json to_json(const bolza::SolveReport& r);
json to_json(const bolza::DualityReport& r);
json to_json(const bolza::SubgradResult& r);
json to_json(const bolza::TiltResult& r);
json to_json(const characteristics::TrajectoryVerdict& v);
json to_json(const characteristics::SubgradCertificate& c);
json to_json(const oracleverify::GridResult& r);
json to_json(const oracleverify::SlopeInterval& s);
json to_json(const oracleverify::FuzzReport& r);
json to_json(const lcontrol::AssumptionReport& r);
json to_json(const lcontrol::LQSolution& s);
json to_json(const lcontrol::ControlProcess& c);

// Problem plus trajectory, the input of trajectory checks.
json characteristics_bundle(const bolza::BolzaProblem& p, const characteristics::HamiltonianTrajectory& traj);

// One row per (t, atom): t, atom, prob, x..., p..., u... (u blank at T).
std::string trajectory_csv(const probspace::AdaptedProcess& x, const probspace::AdaptedProcess& p,
                           const probspace::AdaptedProcess* u = nullptr);

}  // namespace sbolza::io
