#pragma once

#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "htol/queue_sim.hpp"
#include "htol/sde_engine.hpp"

namespace htol::config {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.3.0";

const std::vector<std::string>& experiment_kinds();

// Reads fields of one JSON object and rejects keys that were never asked for.
class Object {
public:
    Object(const json& j, std::string path);

    bool has(const std::string& key) const;
    const json& raw(const std::string& key);
    double number(const std::string& key);
    double number(const std::string& key, double fallback);
    long integer(const std::string& key);
    long integer(const std::string& key, long fallback);
    std::uint64_t u64(const std::string& key, std::uint64_t fallback);
    bool boolean(const std::string& key, bool fallback);
    std::string string(const std::string& key);
    std::string string(const std::string& key, const std::string& fallback);
    Eigen::VectorXd vector(const std::string& key);
    Eigen::VectorXd vector(const std::string& key, const Eigen::VectorXd& fallback);
    Eigen::MatrixXd matrix(const std::string& key);
    std::vector<double> list(const std::string& key, const std::vector<double>& fallback);
    Object object(const std::string& key);
    std::string child(const std::string& key) const;
    const std::string& path() const { return path_; }
    // Throws on any key that was not read.
    void finish() const;

private:
    const json& get(const std::string& key);
    const json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

levy::JumpSizeLaw parse_jump_law(Object o);
levy::LevySpec parse_levy(Object o, int d);
sde::PiecewiseOUModel parse_model(Object o);
queue::QueueFamily parse_queue_family(Object o);
sde::PathConfig parse_run(Object o, int d);

json to_json(const levy::LevySpec& spec);
json to_json(const sde::PiecewiseOUModel& model);
json to_json(const sde::PathConfig& run);

struct ExperimentConfig {
    std::string kind;
    json document;  // after overrides
    std::optional<sde::PiecewiseOUModel> model;
    std::optional<queue::QueueFamily> queue;
    long queue_n = 0;  // servers for single-system runs
    sde::PathConfig run;
    json analysis = json::object();
    std::string output = "out";
    std::vector<std::string> overrides;
};

json load_file(const std::string& path);
// KEY=VALUE with a dotted key; the value is parsed as JSON when possible, else taken as a string.
std::string apply_override(json& doc, const std::string& assignment);
// Fields the analysis block may carry for each experiment kind.
const std::vector<std::string>& analysis_keys(const std::string& kind);
ExperimentConfig parse_experiment(const json& doc);

// Shortest round-trip text for a double; the same bits always give the same text.
std::string fmt(double x);

void write_path_csv(const std::string& file, const sde::Path& path);
void write_scaled_csv(const std::string& file, const queue::ScaledPath& path);
void write_table_csv(const std::string& file, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);
void write_json(const std::string& file, const json& j);

json manifest(const ExperimentConfig& cfg, std::uint64_t model_hash, std::uint64_t seed, int threads);

}  // namespace htol::config
