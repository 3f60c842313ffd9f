#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xens/tensor.hpp"

namespace xens {

// Label-agreement counts between two classifiers on a shared input set.
// counts[i][j] = number of inputs the first model labels i and the
// second labels j.
struct AgreementCounts {
    std::vector<std::vector<size_t>> counts;

    static AgreementCounts from_labels(const std::vector<int>& a,
                                       const std::vector<int>& b, size_t classes);
    size_t total() const;
};

// Cohen's kappa: (P_obs - P_chance) / (1 - P_chance) with
// P_obs = sum_i N_ii / N and P_chance = sum_i (N_i./N)(N_.i/N).
// The degenerate P_chance == 1 case (both marginals concentrated on one
// label) is defined as full agreement, kappa = 1.
double kappa_pair(const AgreementCounts& counts);

// Pairwise kappa over per-model label vectors; unit diagonal, symmetric.
std::vector<std::vector<double>> kappa_matrix(
    const std::vector<std::vector<int>>& labels_per_model, size_t classes);

struct EnsembleTeam {
    std::vector<std::string> member_ids;  // sorted ascending
    double kappa_avg = 0.0;               // mean pairwise kappa
    double benign_acc = -1.0;             // optional, negative = unset
};

// All subsets of size >= 2, ordered by size then lexicographic members.
std::vector<std::vector<std::string>> enumerate_teams(
    const std::vector<std::string>& pool_ids);

// Candidate serving teams: the target model joined with every verifier
// subset of size >= 2, so every team has at least 3 members and always
// contains the target.
std::vector<std::vector<std::string>> enumerate_defense_teams(
    const std::vector<std::string>& verifier_ids, const std::string& target_id);

struct RankedPool {
    std::vector<EnsembleTeam> teams;  // ascending kappa_avg
};

// Scores each candidate team by mean pairwise kappa, drops teams whose
// kappa_avg exceeds `kappa_threshold`, sorts ascending (most diverse
// first); ties break toward the smaller team, then lexicographic ids.
RankedPool rank_teams(const std::vector<std::vector<std::string>>& teams,
                      const std::vector<std::string>& model_ids,
                      const std::vector<std::vector<double>>& kappa,
                      double kappa_threshold);

enum class TeamPolicy { Best, RandomTopM };

// Best -> first team. RandomTopM -> uniform draw among the first
// min(m, size) teams using the caller's seed.
const EnsembleTeam& select_team(const RankedPool& pool, TeamPolicy policy, size_t m,
                                uint64_t seed);

void save_kappa_csv(const std::vector<std::string>& model_ids,
                    const std::vector<std::vector<double>>& kappa,
                    const std::string& path);

struct KappaTable {
    std::vector<std::string> model_ids;
    std::vector<std::vector<double>> kappa;
};

KappaTable load_kappa_csv(const std::string& path);

}  // namespace xens
