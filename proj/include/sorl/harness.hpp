#pragma once

#include "sorl/actor_critic.hpp"
#include "sorl/datagen.hpp"
#include "sorl/io.hpp"
#include "sorl/lsvi.hpp"
#include "sorl/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sorl {

/// Smallest eigenvalue of a symmetric matrix.
double compute_xi(const Eigen::MatrixXd& sigma);

struct KappaReport {
    std::vector<double> per_step;
    double max = 0.0;
    bool jitter_used = false;  // some support needed 1e-12 I on the denominator
};

/// Per step: max over |S| = min(two_s, d) of the largest generalized eigenvalue
/// of ([Sigma*]_S, [Sigma]_S), Sigma from the behavior occupancy and Sigma* from
/// the optimal policy's occupancy.
KappaReport compute_kappa(const SparseLinearMdp& m, const Policy& behavior, int two_s);
KappaReport compute_kappa(const std::vector<Eigen::MatrixXd>& sigma_star, const std::vector<Eigen::MatrixXd>& sigma,
                          int two_s);

/// Population feature covariance of a policy's occupancy, per step.
std::vector<Eigen::MatrixXd> policy_covariances(const SparseLinearMdp& m, const Policy& pi);

enum class Algorithm { lsvi, actor_critic };
Algorithm parse_algorithm(const std::string& s);
std::string to_string(Algorithm a);

struct ExperimentConfig {
    MdpConfig mdp;                      // d and s are overridden by the grids
    std::optional<std::uint64_t> mdp_seed;  // fixed benchmark MDP; else derived per seed
    double pi_star_weight = 0.0;        // behavior = (1 - w) uniform + w pi*
    Algorithm algorithm = Algorithm::actor_critic;
    Oracle oracle = Oracle::srle1;
    BonusSpec bonus;
    CriticSpec critic;
    int T = 20;
    double eta = -1.0;
    double lambda = -1.0;
    double delta = 0.1;
    AttackSpec attack;
    std::vector<int> grid_N{1000};
    std::vector<double> grid_epsilon{0.0};
    std::vector<int> grid_d{12};
    std::vector<int> grid_s{2};
    std::vector<std::uint64_t> seeds{1};
    std::string output;  // CSV path; empty keeps rows in memory only
    bool compute_metrics = true;  // kappa and xi columns
};

/// Parses a "sparse-orl/1" document. Throws ConfigError on schema violations.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& c);

struct ResultRow {
    std::string algorithm;
    std::string oracle;
    int N = 0;
    int d = 0;
    int s = 0;
    double epsilon = 0.0;
    int H = 0;
    std::uint64_t seed = 0;
    double subopt = 0.0;
    double kappa = 0.0;
    double xi = 0.0;
    double wall_ms = 0.0;
    std::string error;
    bool kappa_jitter = false;  // recorded in the manifest, not the CSV
};

inline const char* kResultCsvHeader = "algorithm,oracle,N,d,s,epsilon,H,seed,subopt,kappa,xi,wall_ms,error";
std::string to_csv_line(const ResultRow& r);
std::string format_double(double v);

struct Cell {
    int N;
    double epsilon;
    int d;
    int s;
    std::uint64_t seed;
};

/// Cartesian product in the order d, s, N, epsilon, seed.
std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg);

/// Builds, samples, corrupts and solves a single cell. Errors are recorded in the row.
ResultRow run_cell(const ExperimentConfig& cfg, const Cell& cell);

/// Runs every cell on a pool of at most SPARSE_ORL_THREADS workers. Rows are
/// appended to cfg.output in cell order as they become available; a JSON
/// manifest is written next to it.
std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg);

int worker_count();

}  // namespace sorl
