#include "sorl/io.hpp"

#include "sorl/errors.hpp"
#include "sorl/rng.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sorl {

namespace {

json vec_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
    return a;
}

Eigen::VectorXd json_vec(const json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
    return v;
}

Eigen::MatrixXd json_mat(const json& a, Eigen::Index cols) {
    Eigen::MatrixXd m(a.size(), cols);
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (static_cast<Eigen::Index>(a[r].size()) != cols) throw ConfigError("matrix rows have inconsistent length");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[r][c].get<double>();
    }
    return m;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

}  // namespace

json to_json(const SparseLinearMdp& m) {
    json j;
    j["num_states"] = m.num_states();
    j["num_actions"] = m.num_actions();
    j["H"] = m.horizon();
    j["d"] = m.dim();
    j["s"] = m.sparsity();
    j["support"] = m.support();
    j["features"] = mat_json(m.features().phi);
    json theta = json::array(), mu = json::array();
    for (int h = 0; h < m.horizon(); ++h) {
        theta.push_back(vec_json(m.theta(h)));
        mu.push_back(mat_json(m.mu(h)));
    }
    j["theta"] = theta;
    j["mu"] = mu;
    j["x1"] = m.x1();
    return j;
}

SparseLinearMdp mdp_from_json(const json& j) {
    try {
        FeatureTable f;
        f.num_states = j.at("num_states").get<int>();
        f.num_actions = j.at("num_actions").get<int>();
        const int d = j.at("d").get<int>();
        const int H = j.at("H").get<int>();
        f.phi = json_mat(j.at("features"), d);
        std::vector<Eigen::VectorXd> theta;
        std::vector<Eigen::MatrixXd> mu;
        for (const auto& t : j.at("theta")) theta.push_back(json_vec(t));
        for (const auto& m : j.at("mu")) mu.push_back(json_mat(m, d));
        if (static_cast<int>(theta.size()) != H) throw ConfigError("mdp: theta length differs from H");
        return SparseLinearMdp(std::move(f), j.at("support").get<std::vector<int>>(), std::move(theta), std::move(mu),
                               j.at("s").get<int>(), j.at("x1").get<int>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed mdp document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid mdp document: ") + e.what());
    }
}

json to_json(const Policy& p) {
    json j;
    j["kind"] = p.kind();
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TabularPolicy>) {
                json a = json::array();
                for (const auto& m : v.probs) a.push_back(mat_json(m));
                j["probs"] = a;
            } else if constexpr (std::is_same_v<T, LogLinearPolicy>) {
                json a = json::array();
                for (const auto& u : v.upsilon) a.push_back(vec_json(u));
                j["upsilon"] = a;
            } else if constexpr (std::is_same_v<T, GreedyPolicy>) {
                json a = json::array();
                for (const auto& w : v.w) a.push_back(vec_json(w));
                j["w"] = a;
                j["lo"] = v.lo;
                j["hi"] = v.hi;
            } else {
                json a = json::array();
                for (const auto& m : v.members) a.push_back(to_json(m));
                j["members"] = a;
            }
        },
        p.variant());
    return j;
}

Policy policy_from_json(const json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "tabular") {
            TabularPolicy t;
            for (const auto& m : j.at("probs")) t.probs.push_back(json_mat(m, m.empty() ? 0 : m[0].size()));
            for (const auto& m : t.probs)
                for (Eigen::Index x = 0; x < m.rows(); ++x)
                    if (m.row(x).minCoeff() < 0.0 || std::abs(m.row(x).sum() - 1.0) > 1e-12)
                        throw ConfigError("tabular policy row is not a distribution");
            return Policy(std::move(t));
        }
        if (kind == "log_linear") {
            LogLinearPolicy l;
            for (const auto& u : j.at("upsilon")) l.upsilon.push_back(json_vec(u));
            return Policy(std::move(l));
        }
        if (kind == "greedy") {
            GreedyPolicy g;
            for (const auto& w : j.at("w")) g.w.push_back(json_vec(w));
            g.lo = j.at("lo").get<std::vector<double>>();
            g.hi = j.at("hi").get<std::vector<double>>();
            if (g.lo.size() != g.w.size() || g.hi.size() != g.w.size()) throw ConfigError("greedy policy: ragged clip ranges");
            return Policy(std::move(g));
        }
        if (kind == "mixture") {
            MixturePolicy mix;
            for (const auto& m : j.at("members")) mix.members.push_back(policy_from_json(m));
            if (mix.members.empty()) throw ConfigError("mixture policy has no members");
            return Policy(std::move(mix));
        }
        throw ConfigError("unknown policy kind: " + kind);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed policy document: ") + e.what());
    }
}

json to_json(const EstimatorReport& r) {
    json j;
    j["w_hat"] = vec_json(r.w_hat);
    j["support"] = r.support;
    j["trimmed_set"] = r.trimmed_set;
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["l1_binding"] = r.l1_binding;
    j["objective_trace"] = r.objective_trace;
    return j;
}

std::string dataset_to_jsonl(const Dataset& ds) {
    std::string out;
    json header;
    header["N"] = ds.size();
    header["H"] = ds.horizon();
    header["epsilon"] = ds.epsilon;
    header["mdp_hash"] = ds.provenance.mdp_hash;
    header["behavior_policy_hash"] = ds.provenance.behavior_policy_hash;
    header["seed"] = ds.provenance.seed;
    out += header.dump() + "\n";
    for (int t = 0; t < ds.size(); ++t) {
        json line;
        json steps = json::array();
        for (const Step& s : ds.trajectories[t].steps) steps.push_back(json::array({s.x, s.a, s.R}));
        line["steps"] = steps;
        line["corrupted"] = ds.corrupted[t] != 0;
        out += line.dump() + "\n";
    }
    return out;
}

Dataset dataset_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    Dataset ds;
    try {
        if (!std::getline(in, line)) throw ConfigError("dataset: missing header line");
        const json header = json::parse(line);
        ds.epsilon = header.at("epsilon").get<double>();
        ds.provenance.mdp_hash = header.at("mdp_hash").get<std::string>();
        ds.provenance.behavior_policy_hash = header.at("behavior_policy_hash").get<std::string>();
        ds.provenance.seed = header.at("seed").get<std::uint64_t>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            Trajectory tr;
            for (const auto& s : j.at("steps")) tr.steps.push_back({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<double>()});
            ds.trajectories.push_back(std::move(tr));
            ds.corrupted.push_back(j.at("corrupted").get<bool>() ? 1 : 0);
        }
        if (ds.size() != header.at("N").get<int>()) throw ConfigError("dataset: trajectory count differs from header");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed dataset: ") + e.what());
    }
    return ds;
}

std::string mdp_hash(const SparseLinearMdp& m) { return hex64(fnv1a64(to_json(m).dump())); }
std::string policy_hash(const Policy& p) { return hex64(fnv1a64(to_json(p).dump())); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << contents;
    if (!out) throw Error("write failed: " + path);
}

}  // namespace sorl
