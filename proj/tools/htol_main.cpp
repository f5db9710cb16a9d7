// htol: experiment runner for the piecewise OU / heavy-traffic toolkit.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "htol/acceptance.hpp"
#include "htol/config.hpp"
#include "htol/error.hpp"
#include "htol/estimators.hpp"
#include "htol/generator.hpp"
#include "htol/parallel.hpp"
#include "htol/queue_sim.hpp"
#include "htol/regime.hpp"

namespace fs = std::filesystem;
using htol::config::json;
using htol::config::fmt;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kFalsified = 2;

struct Common {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    std::vector<std::string> overrides;
};

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

double num_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::string out_dir(const htol::config::ExperimentConfig& cfg) {
    fs::create_directories(cfg.output);
    return cfg.output;
}

void write_manifest(const htol::config::ExperimentConfig& cfg, int threads) {
    const std::uint64_t hash = cfg.model ? htol::sde::model_hash(*cfg.model) : 0;
    htol::config::write_json(out_dir(cfg) + "/manifest.json",
                             htol::config::manifest(cfg, hash, cfg.run.master_seed, threads));
}

json regime_json(const htol::lab::RegimeReport& r) {
    json reasons = r.reasons;
    return {{"regime", htol::lab::to_string(r.regime)},
            {"spare_capacity", r.spare_capacity},
            {"theta_c_sup", r.theta_c.unbounded() ? json("inf") : json(r.theta_c.sup)},
            {"theta_c_closed", r.theta_c.closed_at_sup},
            {"ell_tilde", vec_json(r.ell_tilde)},
            {"w_tilde", vec_json(r.w_tilde)},
            {"first_moment_finite", r.first_moment_finite},
            {"gamma_v_zero", r.gamma_v_zero},
            {"irreducibility", r.irreducibility},
            {"rate_exponent", r.rate_exponent},
            {"reasons", reasons}};
}

void write_stationary(const std::string& file, const htol::sde::StationaryEstimate& st) {
    std::vector<std::string> header;
    for (int i = 0; i < st.dim; ++i) header.push_back("x" + std::to_string(i + 1));
    std::vector<std::vector<double>> rows(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) {
        const auto s = st.state(k);
        rows[k].assign(s.data(), s.data() + s.size());
    }
    htol::config::write_table_csv(file, header, rows);
}

// ---- subcommands

int cmd_simulate(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto ens = htol::sde::simulate_ensemble(*cfg.model, cfg.run, threads);
    const std::string dir = out_dir(cfg);
    std::vector<std::vector<double>> jumps;
    for (std::size_t p = 0; p < ens.paths.size(); ++p) {
        const auto& path = ens.paths[p];
        htol::config::write_path_csv(dir + "/path_" + std::to_string(p) + ".csv", path);
        for (const auto& e : path.jumps) {
            std::vector<double> row = {static_cast<double>(p), e.time};
            row.insert(row.end(), e.jump.data(), e.jump.data() + e.jump.size());
            jumps.push_back(row);
        }
    }
    std::vector<std::string> jh = {"path", "t"};
    for (int i = 0; i < cfg.model->dim(); ++i) jh.push_back("dx" + std::to_string(i + 1));
    htol::config::write_table_csv(dir + "/jumps.csv", jh, jumps);
    json summary = {{"paths", ens.paths.size()}, {"diverged", ens.diverged_count()},
                    {"model_hash", htol::sde::hex64(ens.model_hash)}};
    htol::config::write_json(dir + "/summary.json", summary);
    write_manifest(cfg, threads);
    std::cout << "simulated " << ens.paths.size() << " paths, " << ens.diverged_count() << " diverged\n";
    return kOk;
}

int cmd_classify(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto rep = htol::lab::classify(*cfg.model);
    const json j = regime_json(rep);
    htol::config::write_json(out_dir(cfg) + "/report.json", j);
    write_manifest(cfg, threads);
    std::cout << j.dump(2) << "\n";
    return kOk;
}

int cmd_lyapunov(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto& a = cfg.analysis;
    const auto& m = *cfg.model;
    if (!m.control.is_constant()) throw htol::ConfigError("model.control", "lyapunov-check needs a constant v");
    const bool abandon = m.gamma.cwiseAbs().maxCoeff() > 0.0;
    const auto mode = abandon ? htol::matrix::CertificateMode::abandonment : htol::matrix::CertificateMode::no_abandonment;
    const double theta = num_or(a, "theta", 1.0);
    const auto cert = htol::matrix::find_q(m.m, m.gamma, m.control.constant, mode);
    htol::lab::SamplePlan plan;
    plan.r0 = num_or(a, "r0", plan.r0);
    plan.shells = static_cast<int>(num_or(a, "shells", plan.shells));
    plan.directions = static_cast<int>(num_or(a, "directions", plan.directions));
    plan.delta = num_or(a, "delta", plan.delta);
    plan.quad.rel_tol = num_or(a, "quad_rel_tol", plan.quad.rel_tol);
    plan.seed = cfg.run.master_seed;
    plan.threads = threads;
    const auto rep = htol::lab::verify_foster_lyapunov(m, cert, theta, plan);
    std::vector<std::vector<double>> rows;
    for (const auto& p : rep.points) {
        std::vector<double> row(p.x.data(), p.x.data() + p.x.size());
        row.insert(row.end(), {p.radius, p.in_cone ? 1.0 : 0.0, p.av, p.v_theta, p.v_theta_m1, p.phi, p.violation ? 1.0 : 0.0});
        rows.push_back(row);
    }
    std::vector<std::string> header;
    for (int i = 0; i < m.dim(); ++i) header.push_back("x" + std::to_string(i + 1));
    header.insert(header.end(), {"radius", "in_cone", "AV", "V_theta", "V_theta_minus_1", "phi", "violation"});
    const std::string dir = out_dir(cfg);
    htol::config::write_table_csv(dir + "/drift_points.csv", header, rows);
    json q = json::array();
    for (long i = 0; i < cert.q.rows(); ++i) q.push_back(vec_json(cert.q.row(i).transpose()));
    json j = {{"certificate", {{"Q", q}, {"method", cert.method}, {"margin_first", cert.margin_first},
                               {"margin_second", cert.margin_second}}},
              {"condition", htol::lab::to_string(rep.condition)},
              {"theta", theta},
              {"delta", rep.delta},
              {"c0", rep.c0},
              {"c1", rep.c1},
              {"violations", rep.violations},
              {"accuracy_failure", rep.accuracy_failure},
              {"note", rep.note}};
    htol::config::write_json(dir + "/lyapunov.json", j);
    write_manifest(cfg, threads);
    std::cout << "condition " << htol::lab::to_string(rep.condition) << ", theta " << theta << ", " << rep.violations
              << " violations over " << rep.points.size() << " points\n";
    return rep.violations > 0 || rep.accuracy_failure ? kFalsified : kOk;
}

htol::sde::StationaryEstimate stationary(const htol::config::ExperimentConfig& cfg, int threads) {
    const bool force = cfg.analysis.value("override_classification", false);
    return htol::sde::stationary_sample(*cfg.model, cfg.run, threads, force);
}

int cmd_stationary(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto st = stationary(cfg, threads);
    const std::string dir = out_dir(cfg);
    write_stationary(dir + "/stationary.csv", st);
    const auto idle = htol::lab::mean_idleness(st);
    json j = {{"samples", st.size()},      {"paths", st.path_offsets.size() - 1},
              {"thin_stride", st.thin_stride}, {"effective_sample_size", st.effective_sample_size},
              {"mean_idleness", idle.value}, {"mean_idleness_se", idle.se}};
    htol::config::write_json(dir + "/stationary.json", j);
    write_manifest(cfg, threads);
    std::cout << "stationary sample of " << st.size() << " states, stride " << st.thin_stride << "\n";
    return kOk;
}

int cmd_tail(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto rep = htol::lab::classify(*cfg.model);
    const auto st = stationary(cfg, threads);
    std::vector<double> wp(st.size());
    for (std::size_t k = 0; k < st.size(); ++k) wp[k] = std::max(0.0, rep.w_tilde.dot(st.state(k)));
    std::size_t k = 0;
    if (cfg.analysis.contains("k")) k = cfg.analysis.at("k").get<std::size_t>();
    else if (cfg.analysis.contains("k_fraction"))
        k = static_cast<std::size_t>(cfg.analysis.at("k_fraction").get<double>() * static_cast<double>(wp.size()));
    const auto est = htol::lab::tail_index(wp, k);
    std::vector<std::vector<double>> rows;
    for (const auto& [kk, idx] : est.k_path) rows.push_back({static_cast<double>(kk), idx});
    const std::string dir = out_dir(cfg);
    htol::config::write_table_csv(dir + "/k_path.csv", {"k", "index"}, rows);
    std::vector<double> probes = {0.3, 0.8, 1.0, 1.8};
    if (cfg.analysis.contains("moments")) probes = cfg.analysis.at("moments").get<std::vector<double>>();
    json mj = json::array();
    for (const auto& p : htol::lab::moment_probe(st, probes))
        mj.push_back({{"p", p.p}, {"estimate", p.estimate}, {"growth", p.growth}, {"divergent", p.divergent},
                      {"medians", p.medians}});
    const double predicted = rep.regime == htol::lab::Regime::polynomial ? rep.rate_exponent : std::nan("");
    json j = {{"index", est.index},     {"k", est.k_used},           {"ci_half_width", est.ci_half_width},
              {"trend_z", est.trend_z}, {"power_law", est.power_law}, {"moments", mj},
              {"regime", htol::lab::to_string(rep.regime)}};
    if (!std::isnan(predicted)) j["predicted_index"] = predicted;
    htol::config::write_json(dir + "/tail.json", j);
    write_manifest(cfg, threads);
    std::cout << "Hill index of <w,x>^+ " << est.index << " at k = " << est.k_used << " (+- " << est.ci_half_width
              << ")\n";
    if (!std::isnan(predicted) && cfg.analysis.contains("tolerance") &&
        std::abs(est.index - predicted) > cfg.analysis.at("tolerance").get<double>())
        return kFalsified;
    return kOk;
}

int cmd_idleness(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto rep = htol::lab::classify(*cfg.model);
    const auto st = stationary(cfg, threads);
    const auto idle = htol::lab::mean_idleness(st);
    const double sigmas = num_or(cfg.analysis, "sigmas", 3.0);
    const bool applies = rep.gamma_v_zero && rep.spare_capacity > 0.0;
    json j = {{"mean_idleness", idle.value}, {"se", idle.se},          {"n_eff", idle.n_eff},
              {"batches", idle.batches},     {"predicted", rep.spare_capacity}, {"identity_applies", applies}};
    htol::config::write_json(out_dir(cfg) + "/idleness.json", j);
    write_manifest(cfg, threads);
    std::cout << "E<e,x>^- = " << idle.value << " +- " << idle.se << ", spare capacity " << rep.spare_capacity << "\n";
    if (applies && std::abs(idle.value - rep.spare_capacity) > sigmas * idle.se) return kFalsified;
    return kOk;
}

int cmd_tv_decay(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto& a = cfg.analysis;
    if (!a.contains("times")) throw htol::ConfigError("analysis.times", "tv-decay needs a time grid");
    const auto times = a.at("times").get<std::vector<double>>();
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(cfg.model->dim());
    if (a.contains("x0")) {
        const auto v = a.at("x0").get<std::vector<double>>();
        if (static_cast<int>(v.size()) != cfg.model->dim()) throw htol::ConfigError("analysis.x0", "wrong length");
        x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
    }
    const auto ref = stationary(cfg, threads);
    htol::sde::PathConfig ens = cfg.run;
    ens.n_paths = static_cast<int>(num_or(a, "ensemble_paths", 10000));
    ens.master_seed = htol::rng::mix64(cfg.run.master_seed + 1);
    htol::lab::TVDecayOptions opt;
    opt.log_time = a.value("log_time", true);
    opt.fit_tail_fraction = num_or(a, "fit_tail_fraction", opt.fit_tail_fraction);
    opt.min_floor_multiple = num_or(a, "min_floor_multiple", opt.min_floor_multiple);
    opt.bins = static_cast<int>(num_or(a, "bins", 0));
    const auto est = htol::lab::tv_decay(*cfg.model, ref, x0, times, ens, threads, opt);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < est.times.size(); ++i) rows.push_back({est.times[i], est.tv[i], est.noise_floor[i]});
    const std::string dir = out_dir(cfg);
    htol::config::write_table_csv(dir + "/tv.csv", {"t", "tv", "noise_floor"}, rows);
    json j = {{"slope", est.slope}, {"slope_se", est.slope_se}, {"intercept", est.intercept}, {"r2", est.r2},
              {"fit_from", est.fit_from}, {"fit_to", est.fit_to}, {"log_time", est.log_time}, {"bins", est.bins},
              {"note", est.note}};
    htol::config::write_json(dir + "/tv_decay.json", j);
    write_manifest(cfg, threads);
    std::cout << "TV slope " << est.slope << " +- " << est.slope_se << " (R^2 " << est.r2 << ")\n";
    return kOk;
}

int cmd_queue_compare(const htol::config::ExperimentConfig& cfg, int threads) {
    const auto& a = cfg.analysis;
    const auto& fam = *cfg.queue;
    std::vector<long> ns = {50, 200, 800};
    if (a.contains("ns")) ns = a.at("ns").get<std::vector<long>>();
    if (cfg.queue_n > 0) ns = {cfg.queue_n};
    const double t = num_or(a, "t", 2.0);
    const int reps = static_cast<int>(num_or(a, "reps", 2000));
    htol::queue::FcltOptions opt;
    opt.sde_dt = num_or(a, "sde_dt", opt.sde_dt);
    opt.bootstrap = static_cast<int>(num_or(a, "bootstrap", opt.bootstrap));
    const auto lim = htol::queue::limit_model(fam);
    const auto rep = htol::queue::fclt_compare(fam, ns, lim, t, reps, cfg.run.master_seed, threads, opt);
    std::vector<std::vector<double>> rows;
    for (const auto& p : rep.points) rows.push_back({static_cast<double>(p.n), p.ks, p.lo, p.hi, p.queue_mean});
    const std::string dir = out_dir(cfg);
    htol::config::write_table_csv(dir + "/ks.csv", {"n", "ks", "ci_lo", "ci_hi", "queue_mean"}, rows);
    std::vector<std::vector<double>> totals;
    for (std::size_t r = 0; r < rep.limit_totals.size(); ++r) {
        std::vector<double> row = {rep.limit_totals[r]};
        for (const auto& p : rep.points) row.push_back(r < p.totals.size() ? p.totals[r] : std::nan(""));
        totals.push_back(row);
    }
    std::vector<std::string> th = {"limit"};
    for (const auto& p : rep.points) th.push_back("n" + std::to_string(p.n));
    htol::config::write_table_csv(dir + "/totals.csv", th, totals);
    json j = {{"t", rep.t_check}, {"alpha", rep.alpha}, {"reps", rep.reps}, {"limit_mean", rep.limit_mean},
              {"null_ks", {rep.null.ks, rep.null.lo, rep.null.hi}}};
    htol::config::write_json(dir + "/queue_compare.json", j);
    write_manifest(cfg, threads);
    for (const auto& p : rep.points)
        std::cout << "n = " << p.n << ": KS " << p.ks << " [" << p.lo << ", " << p.hi << "]\n";
    // KS should fall with n; one inversion is tolerated when the intervals overlap
    int inversions = 0;
    for (std::size_t i = 1; i < rep.points.size(); ++i) {
        const auto& prev = rep.points[i - 1];
        const auto& cur = rep.points[i];
        if (cur.ks < prev.ks) continue;
        ++inversions;
        if (cur.lo > prev.hi) return kFalsified;
    }
    return inversions > 1 ? kFalsified : kOk;
}

int cmd_acceptance(const json& analysis, std::uint64_t seed, bool seed_set, int threads, const std::string& out) {
    htol::acceptance::SuiteOptions opt;
    if (seed_set) opt.seed = seed;
    opt.threads = threads;
    if (analysis.contains("only")) opt.only = analysis.at("only").get<std::vector<int>>();
    if (analysis.contains("rerun_threads")) opt.rerun_threads = analysis.at("rerun_threads").get<int>();
    opt.on_result = [](const htol::acceptance::CriterionResult& r) {
        std::cout << htol::acceptance::format_line(r) << std::endl;
    };
    const auto rep = htol::acceptance::run_suite(opt);
    if (!out.empty()) {
        fs::create_directories(out);
        json rows = json::array();
        for (const auto& r : rep.results)
            rows.push_back({{"criterion", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail},
                            {"digest", htol::sde::hex64(r.raw_hash)}});
        htol::config::write_json(out + "/acceptance.json", {{"seed", opt.seed}, {"results", rows}});
    }
    int passed = 0;
    for (const auto& r : rep.results) passed += r.pass ? 1 : 0;
    std::cout << passed << "/" << rep.results.size() << " criteria passed\n";
    return rep.all_pass() ? kOk : kFalsified;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"htol: piecewise OU processes with Levy noise and their queueing limits"};
    app.require_subcommand(1);
    Common c;
    const std::vector<std::pair<std::string, std::string>> subs = {
        {"simulate", "simulate an ensemble of paths"},
        {"classify", "report the regime the theory predicts"},
        {"lyapunov-check", "find Q and check the drift condition on sample shells"},
        {"stationary", "long-run sample of the invariant law"},
        {"tail", "Hill index of <w,x>^+ and moment probes"},
        {"tv-decay", "projected total variation against the invariant law over time"},
        {"idleness", "mean idleness against the spare capacity"},
        {"queue-compare", "KS distance between scaled queues and the limit SDE"},
        {"acceptance", "run the acceptance criteria"}};
    std::vector<CLI::App*> apps;
    for (const auto& [name, help] : subs) {
        auto* s = app.add_subcommand(name, help);
        s->add_option("--config", c.config_path, "JSON experiment file")->check(CLI::ExistingFile);
        s->add_option("--out", c.out, "output directory");
        s->add_option("--seed", c.seed, "master seed");
        s->add_option("--threads", c.threads, "worker threads (default HTOL_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
        s->add_option("--override", c.overrides, "KEY=VALUE with a dotted key, repeatable")->take_all();
        apps.push_back(s);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kError;
    }
    std::string name;
    for (auto* s : apps)
        if (s->parsed()) {
            name = s->get_name();
            c.seed_set = s->count("--seed") > 0;
        }
    const int threads = c.threads > 0 ? c.threads : htol::default_threads();
    try {
        json doc;
        if (c.config_path.empty()) {
            if (name != "acceptance") throw htol::ConfigError("--config", "required for " + name);
            doc = {{"schema_version", htol::config::kSchemaVersion}, {"experiment", "acceptance"}};
        } else {
            doc = htol::config::load_file(c.config_path);
        }
        std::vector<std::string> applied;
        for (const auto& o : c.overrides) {
            applied.push_back(htol::config::apply_override(doc, o));
            std::cerr << "override " << applied.back() << "\n";
        }
        if (doc.contains("experiment") && doc.at("experiment") != name)
            std::cerr << "note: config names experiment " << doc.at("experiment").dump() << ", running " << name << "\n";
        doc["experiment"] = name;
        auto cfg = htol::config::parse_experiment(doc);
        cfg.overrides = applied;
        if (c.seed_set) cfg.run.master_seed = c.seed;
        if (!c.out.empty()) cfg.output = c.out;
        if (name == "simulate") return cmd_simulate(cfg, threads);
        if (name == "classify") return cmd_classify(cfg, threads);
        if (name == "lyapunov-check") return cmd_lyapunov(cfg, threads);
        if (name == "stationary") return cmd_stationary(cfg, threads);
        if (name == "tail") return cmd_tail(cfg, threads);
        if (name == "tv-decay") return cmd_tv_decay(cfg, threads);
        if (name == "idleness") return cmd_idleness(cfg, threads);
        if (name == "queue-compare") return cmd_queue_compare(cfg, threads);
        return cmd_acceptance(cfg.analysis, c.seed, c.seed_set, threads, c.out);
    } catch (const htol::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    } catch (const json::exception& e) {
        std::cerr << "error: bad analysis field: " << e.what() << "\n";
        return kError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
}
