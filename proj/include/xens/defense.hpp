#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xens/denoise.hpp"
#include "xens/diversity.hpp"
#include "xens/model.hpp"

namespace xens {

enum class ConsensusRule { Majority, Plurality, Average, WeightedAverage };

std::string consensus_rule_name(ConsensusRule r);
ConsensusRule consensus_rule_from_name(const std::string& s);

struct DefenseConfig {
    std::vector<DenoiserSpec> denoisers;  // may be empty: output-only defense
    ConsensusRule rule = ConsensusRule::Plurality;
    double confidence_level = 0.5;        // T, min winning share of the votes
    bool include_target_vote = true;      // count the target's raw prediction
    uint64_t seed = 0;                    // per-query team draws in defend_batch

    void validate() const;
};

enum class VerdictOutcome { Verified, Repaired, Flagged };

std::string verdict_outcome_name(VerdictOutcome o);

// One prediction vector: input variant `denoiser` ("raw" for the
// unmodified input) run through model `model_id`.
struct Vote {
    std::string denoiser;
    std::string model_id;
    PredictionVector pred;
};

struct Verdict {
    VerdictOutcome outcome = VerdictOutcome::Flagged;
    int label = -1;               // -1 when Flagged
    double agreement = 0.0;       // vote share of the consensus label
    double detection_score = 0.0; // mean pairwise L1 / 2 over the votes
    std::vector<Vote> votes;
};

struct TeamMember {
    std::string id;
    const MicroModel* model = nullptr;
};

// L1 distance between probability vectors; 2 * total variation.
double l1_distance(const PredictionVector& a, const PredictionVector& b);

struct ConsensusResult {
    bool has_winner = false;
    int label = -1;
    double share = 0.0;  // winner's share of argmax votes; top share otherwise
};

// Majority needs a strict > 1/2 vote; Plurality a unique maximum;
// Average and WeightedAverage take the argmax of the (confidence
// weighted) mean vector and always name a winner.
ConsensusResult consensus(const std::vector<PredictionVector>& vectors, ConsensusRule rule);

// Mean pairwise L1 / 2 across prediction vectors; in [0,1], 0 only when
// all vectors agree exactly. Needs at least two vectors.
double detection_score(const std::vector<PredictionVector>& vectors);

// Full query path: denoise fan-out, predictions from every team member
// on every variant, consensus at confidence level T, then
// Verified / Repaired / Flagged against the target's raw label.
Verdict defend(const Tensor& x, const std::vector<TeamMember>& team,
               const std::string& target_id, const DefenseConfig& cfg);

// Batch driver. Under RandomTopM the serving team is redrawn per query
// from seed and query index, so results are order-stable and
// parallel-safe.
std::vector<Verdict> defend_batch(const std::vector<Tensor>& inputs,
                                  const std::map<std::string, const MicroModel*>& models,
                                  const RankedPool& ranked, TeamPolicy policy, size_t top_m,
                                  const std::string& target_id, const DefenseConfig& cfg,
                                  int workers);

void save_verdicts(const std::vector<Verdict>& verdicts, const std::string& source,
                   const std::string& path);
std::vector<Verdict> load_verdicts(const std::string& path);

}  // namespace xens
