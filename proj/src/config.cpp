#include "htol/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "htol/error.hpp"

namespace htol::config {

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = {"simulate", "classify", "lyapunov-check", "stationary", "tail",
                                                   "tv-decay", "idleness", "queue-compare", "acceptance"};
    return kinds;
}

Object::Object(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_, "expected an object");
}

std::string Object::child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool Object::has(const std::string& key) const { return j_->contains(key); }

const json& Object::get(const std::string& key) {
    if (!j_->contains(key)) throw ConfigError(child(key), "missing required field");
    seen_.insert(key);
    return j_->at(key);
}

const json& Object::raw(const std::string& key) { return get(key); }

double Object::number(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError(child(key), "expected a number");
    return v.get<double>();
}

double Object::number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

long Object::integer(const std::string& key) {
    const json& v = get(key);
    if (!v.is_number_integer()) throw ConfigError(child(key), "expected an integer");
    return v.get<long>();
}

long Object::integer(const std::string& key, long fallback) { return has(key) ? integer(key) : fallback; }

std::uint64_t Object::u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError(child(key), "expected a nonnegative integer");
}

bool Object::boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) throw ConfigError(child(key), "expected true or false");
    return v.get<bool>();
}

std::string Object::string(const std::string& key) {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError(child(key), "expected a string");
    return v.get<std::string>();
}

std::string Object::string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
}

Eigen::VectorXd Object::vector(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array() || v.empty()) throw ConfigError(child(key), "expected a non-empty array of numbers");
    Eigen::VectorXd out(static_cast<long>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(child(key) + "[" + std::to_string(i) + "]", "expected a number");
        out(static_cast<long>(i)) = v[i].get<double>();
    }
    return out;
}

Eigen::VectorXd Object::vector(const std::string& key, const Eigen::VectorXd& fallback) {
    return has(key) ? vector(key) : fallback;
}

Eigen::MatrixXd Object::matrix(const std::string& key) {
    const json& v = get(key);
    if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty())
        throw ConfigError(child(key), "expected an array of rows");
    const std::size_t rows = v.size(), cols = v[0].size();
    Eigen::MatrixXd out(static_cast<long>(rows), static_cast<long>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        const std::string rp = child(key) + "[" + std::to_string(i) + "]";
        if (!v[i].is_array() || v[i].size() != cols) throw ConfigError(rp, "rows must have equal length");
        for (std::size_t j = 0; j < cols; ++j) {
            if (!v[i][j].is_number()) throw ConfigError(rp + "[" + std::to_string(j) + "]", "expected a number");
            out(static_cast<long>(i), static_cast<long>(j)) = v[i][j].get<double>();
        }
    }
    return out;
}

std::vector<double> Object::list(const std::string& key, const std::vector<double>& fallback) {
    if (!has(key)) return fallback;
    const Eigen::VectorXd v = vector(key);
    return {v.data(), v.data() + v.size()};
}

Object Object::object(const std::string& key) { return Object(get(key), child(key)); }

void Object::finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
        if (!seen_.count(it.key())) throw ConfigError(child(it.key()), "unknown field");
}

levy::JumpSizeLaw parse_jump_law(Object o) {
    levy::JumpSizeLaw law;
    const std::string kind = o.string("law");
    if (kind == "deterministic") {
        law.law = levy::JumpLaw::deterministic;
        law.size = o.number("size");
    } else if (kind == "exponential") {
        law.law = levy::JumpLaw::exponential;
        law.mean = o.number("mean");
    } else if (kind == "pareto") {
        law.law = levy::JumpLaw::pareto;
        law.tail_index = o.number("tail_index");
        law.minimum = o.number("minimum", 1.0);
    } else if (kind == "empirical") {
        law.law = levy::JumpLaw::empirical;
        law.samples = o.list("samples", {});
        if (law.samples.empty()) throw ConfigError(o.child("samples"), "need at least one value");
    } else {
        throw ConfigError(o.child("law"), "unknown jump law '" + kind + "'");
    }
    o.finish();
    return law;
}

levy::LevySpec parse_levy(Object o, int d) {
    levy::LevySpec spec;
    spec.drift = o.vector("drift", Eigen::VectorXd::Zero(d));
    if (o.has("components")) {
        const json& arr = o.raw("components");
        if (!arr.is_array()) throw ConfigError(o.child("components"), "expected an array");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            Object c(arr[k], o.child("components") + "[" + std::to_string(k) + "]");
            const std::string type = c.string("type");
            if (type == "stable_axis") {
                levy::StableAxisSpec s;
                s.alpha = c.number("alpha");
                const json& eta = c.raw("eta");
                s.eta = eta.is_number() ? Eigen::VectorXd::Constant(d, eta.get<double>()) : c.vector("eta");
                s.skew = c.number("skew", 0.0);
                spec.components.emplace_back(s);
            } else if (type == "isotropic_stable") {
                levy::IsotropicStableSpec s;
                s.alpha = c.number("alpha");
                s.eta = c.number("eta");
                spec.components.emplace_back(s);
            } else if (type == "compound_poisson") {
                levy::CompoundPoissonSpec s;
                s.rate = c.number("rate");
                s.direction = c.vector("direction");
                s.jump = parse_jump_law(c.object("jump"));
                spec.components.emplace_back(s);
            } else {
                throw ConfigError(c.child("type"), "unknown component type '" + type + "'");
            }
            c.finish();
        }
    }
    o.finish();
    try {
        spec.validate(d);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(o.path(), e.what());
    }
    return spec;
}

sde::PiecewiseOUModel parse_model(Object o) {
    sde::PiecewiseOUModel m;
    m.ell = o.vector("ell");
    const int d = static_cast<int>(m.ell.size());
    m.m = o.matrix("M");
    m.gamma = o.vector("gamma", Eigen::VectorXd::Zero(d));
    if (o.has("v") && o.has("control")) throw ConfigError(o.child("control"), "give either v or control, not both");
    if (o.has("control")) {
        Object c = o.object("control");
        const std::string kind = c.string("kind");
        if (kind == "constant") {
            m.control = sde::Control::fixed(c.vector("v"));
        } else if (kind == "threshold") {
            // v(x) = below when <e,x> <= threshold, else above
            const double h = c.number("threshold");
            const Eigen::VectorXd below = c.vector("below"), above = c.vector("above");
            m.control = sde::Control::state_dependent([h, below, above](const Eigen::VectorXd& x) {
                return x.sum() <= h ? below : above;
            });
        } else {
            throw ConfigError(c.child("kind"), "unknown control kind '" + kind + "'");
        }
        c.finish();
    } else {
        m.control = sde::Control::fixed(o.vector("v"));
    }
    if (o.has("sigma")) m.diffusion = sde::Diffusion::constant_matrix(o.matrix("sigma"));
    if (o.has("levy")) {
        m.levy = parse_levy(o.object("levy"), d);
    } else {
        m.levy.drift = Eigen::VectorXd::Zero(d);
    }
    o.finish();
    try {
        m.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(o.path(), e.what());
    }
    return m;
}

queue::QueueFamily parse_queue_family(Object o) {
    queue::QueueFamily f;
    f.lambda = o.vector("lambda");
    const int d = static_cast<int>(f.lambda.size());
    f.ell_hat = o.vector("ell_hat", Eigen::VectorXd::Zero(d));
    f.mu = o.vector("mu");
    f.gamma = o.vector("gamma", Eigen::VectorXd::Zero(d));
    f.v = o.vector("v");
    const std::string arr = o.string("arrivals", "poisson");
    if (arr == "poisson") f.arrivals = queue::ArrivalKind::poisson;
    else if (arr == "pareto_renewal") f.arrivals = queue::ArrivalKind::pareto_renewal;
    else throw ConfigError(o.child("arrivals"), "expected poisson or pareto_renewal");
    f.alpha = o.number("alpha", 2.0);
    if (o.has("interruptions")) {
        Object i = o.object("interruptions");
        f.interruptions.enabled = true;
        f.interruptions.up_rate = i.number("up_rate");
        f.interruptions.down = parse_jump_law(i.object("down"));
        i.finish();
    }
    o.finish();
    try {
        f.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(o.child(e.path()), e.what());
    }
    return f;
}

sde::PathConfig parse_run(Object o, int d) {
    sde::PathConfig c;
    c.dt = o.number("dt", c.dt);
    c.horizon = o.number("horizon", c.horizon);
    c.n_paths = static_cast<int>(o.integer("n_paths", c.n_paths));
    c.master_seed = o.u64("seed", c.master_seed);
    c.x0 = o.vector("x0", Eigen::VectorXd::Zero(d));
    c.burn_in = o.number("burn_in", c.burn_in);
    c.thin_stride = static_cast<int>(o.integer("thin_stride", c.thin_stride));
    c.record_stride = static_cast<int>(o.integer("record_stride", c.record_stride));
    c.record_from = o.number("record_from", c.record_from);
    c.keep_jump_log = o.boolean("keep_jump_log", c.keep_jump_log);
    c.divergence_threshold = o.number("divergence_threshold", c.divergence_threshold);
    o.finish();
    try {
        c.validate(d);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(o.path(), e.what());
    }
    return c;
}

namespace {

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (long j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        a.push_back(r);
    }
    return a;
}

json law_json(const levy::JumpSizeLaw& l) {
    switch (l.law) {
        case levy::JumpLaw::deterministic: return {{"law", "deterministic"}, {"size", l.size}};
        case levy::JumpLaw::exponential: return {{"law", "exponential"}, {"mean", l.mean}};
        case levy::JumpLaw::pareto: return {{"law", "pareto"}, {"tail_index", l.tail_index}, {"minimum", l.minimum}};
        case levy::JumpLaw::empirical: return {{"law", "empirical"}, {"samples", l.samples}};
    }
    return {};
}

}  // namespace

json to_json(const levy::LevySpec& spec) {
    json comps = json::array();
    for (const auto& c : spec.components) {
        if (const auto* s = std::get_if<levy::StableAxisSpec>(&c))
            comps.push_back({{"type", "stable_axis"}, {"alpha", s->alpha}, {"eta", vec_json(s->eta)}, {"skew", s->skew}});
        else if (const auto* i = std::get_if<levy::IsotropicStableSpec>(&c))
            comps.push_back({{"type", "isotropic_stable"}, {"alpha", i->alpha}, {"eta", i->eta}});
        else if (const auto* p = std::get_if<levy::CompoundPoissonSpec>(&c))
            comps.push_back({{"type", "compound_poisson"},
                             {"rate", p->rate},
                             {"direction", vec_json(p->direction)},
                             {"jump", law_json(p->jump)}});
    }
    return {{"drift", vec_json(spec.drift)}, {"components", comps}};
}

json to_json(const sde::PiecewiseOUModel& m) {
    json j = {{"ell", vec_json(m.ell)}, {"M", mat_json(m.m)}, {"gamma", vec_json(m.gamma)}, {"levy", to_json(m.levy)}};
    if (m.control.is_constant()) j["v"] = vec_json(m.control.constant);
    else j["control"] = "state-dependent";
    if (m.diffusion.kind == sde::Diffusion::Kind::constant) j["sigma"] = mat_json(m.diffusion.sigma);
    else if (m.diffusion.kind == sde::Diffusion::Kind::callable) j["sigma"] = "callable";
    return j;
}

json to_json(const sde::PathConfig& c) {
    return {{"dt", c.dt},
            {"horizon", c.horizon},
            {"n_paths", c.n_paths},
            {"seed", c.master_seed},
            {"x0", vec_json(c.x0)},
            {"burn_in", c.burn_in},
            {"thin_stride", c.thin_stride},
            {"record_stride", c.record_stride},
            {"record_from", c.record_from},
            {"keep_jump_log", c.keep_jump_log},
            {"divergence_threshold", c.divergence_threshold}};
}

json load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON in ") + path + ": " + e.what());
    }
}

std::string apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--override", "expected KEY=VALUE, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &doc;
    std::string path;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty()) throw ConfigError(key, "empty path segment");
        path += (i ? "." : "") + parts[i];
        if (!node->is_object()) throw ConfigError(path, "cannot descend into a non-object");
        if (i + 1 == parts.size()) {
            (*node)[parts[i]] = value;
        } else {
            if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
            node = &(*node)[parts[i]];
        }
    }
    return key + " = " + value.dump();
}

const std::vector<std::string>& analysis_keys(const std::string& kind) {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"simulate", {}},
        {"classify", {}},
        {"lyapunov-check", {"theta", "r0", "shells", "directions", "delta", "quad_rel_tol"}},
        {"stationary", {"override_classification"}},
        {"tail", {"override_classification", "k", "k_fraction", "moments", "tolerance"}},
        {"idleness", {"override_classification", "sigmas"}},
        {"tv-decay",
         {"override_classification", "times", "x0", "ensemble_paths", "log_time", "fit_tail_fraction",
          "min_floor_multiple", "bins"}},
        {"queue-compare", {"ns", "t", "reps", "sde_dt", "bootstrap"}},
        {"acceptance", {"only", "rerun_threads"}}};
    static const std::vector<std::string> none;
    const auto it = keys.find(kind);
    return it == keys.end() ? none : it->second;
}

ExperimentConfig parse_experiment(const json& doc) {
    ExperimentConfig cfg;
    cfg.document = doc;
    Object top(doc, "");
    const long version = top.integer("schema_version");
    if (version != kSchemaVersion)
        throw ConfigError("schema_version", "unsupported version " + std::to_string(version) + ", expected " +
                                                std::to_string(kSchemaVersion));
    cfg.kind = top.string("experiment");
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end())
        throw ConfigError("experiment", "unknown experiment '" + cfg.kind + "'");
    cfg.output = top.string("output", cfg.output);
    int d = 0;
    if (top.has("model")) {
        cfg.model = parse_model(top.object("model"));
        d = cfg.model->dim();
    }
    if (top.has("queue")) {
        Object q = top.object("queue");
        cfg.queue_n = q.integer("n", 0);
        // the family parser must not see the server count
        json rest = q.raw("lambda").is_null() ? json::object() : doc.at("queue");
        rest.erase("n");
        cfg.queue = parse_queue_family(Object(rest, "queue"));
        if (d == 0) d = static_cast<int>(cfg.queue->lambda.size());
    }
    if (top.has("run")) {
        if (d == 0) throw ConfigError("run", "a run block needs a model or queue block");
        cfg.run = parse_run(top.object("run"), d);
    } else if (d > 0) {
        cfg.run.x0 = Eigen::VectorXd::Zero(d);
    }
    if (top.has("analysis")) {
        cfg.analysis = top.raw("analysis");
        if (!cfg.analysis.is_object()) throw ConfigError("analysis", "expected an object");
        const auto& allowed = analysis_keys(cfg.kind);
        for (const auto& [key, value] : cfg.analysis.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                throw ConfigError("analysis." + key, "unknown field for experiment '" + cfg.kind + "'");
    }
    top.finish();
    const bool needs_model = cfg.kind != "queue-compare" && cfg.kind != "acceptance";
    if (needs_model && !cfg.model) throw ConfigError("model", "experiment '" + cfg.kind + "' needs a model block");
    if (cfg.kind == "queue-compare" && !cfg.queue) throw ConfigError("queue", "queue-compare needs a queue block");
    return cfg;
}

std::string fmt(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_out(const std::string& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write " + file);
    return out;
}

}  // namespace

void write_path_csv(const std::string& file, const sde::Path& path) {
    auto out = open_out(file);
    out << "t";
    for (int i = 0; i < path.dim; ++i) out << ",x" << (i + 1);
    out << ",jump\n";
    for (std::size_t k = 0; k < path.size(); ++k) {
        out << fmt(path.times[k]);
        for (int i = 0; i < path.dim; ++i) out << ',' << fmt(path.states[k * static_cast<std::size_t>(path.dim) + static_cast<std::size_t>(i)]);
        out << ',' << static_cast<int>(path.jump_flags[k]) << '\n';
    }
}

void write_scaled_csv(const std::string& file, const queue::ScaledPath& path) {
    auto out = open_out(file);
    out << "t";
    for (int i = 0; i < path.dim; ++i) out << ",x" << (i + 1);
    out << ",jump\n";
    for (std::size_t k = 0; k < path.size(); ++k) {
        out << fmt(path.times[k]);
        for (int i = 0; i < path.dim; ++i) out << ',' << fmt(path.states[k * static_cast<std::size_t>(path.dim) + static_cast<std::size_t>(i)]);
        out << ',' << static_cast<int>(path.jump_flags[k]) << '\n';
    }
}

void write_table_csv(const std::string& file, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
    auto out = open_out(file);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << fmt(r[i]);
        out << '\n';
    }
}

void write_json(const std::string& file, const json& j) {
    auto out = open_out(file);
    out << j.dump(2) << '\n';
}

json manifest(const ExperimentConfig& cfg, std::uint64_t model_hash, std::uint64_t seed, int threads) {
    (void)threads;  // outputs do not depend on it, so it stays out of the manifest
    json m = {{"tool", "htol"},
              {"version", kToolVersion},
              {"schema_version", kSchemaVersion},
              {"experiment", cfg.kind},
              {"seed", seed},
              {"model_hash", sde::hex64(model_hash)},
              {"config", cfg.document},
              {"overrides", cfg.overrides}};
    return m;
}

}  // namespace htol::config
