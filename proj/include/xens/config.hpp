#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xens/attacks.hpp"
#include "xens/defense.hpp"
#include "xens/denoise.hpp"

namespace xens {

// Time column source for reports: Work counts model evaluations (fully
// deterministic, the default), Wall reports measured seconds.
enum class TimingMode { Work, Wall };

struct DatasetConfig {
    size_t classes = 10;
    size_t side = 16;
    size_t per_class_train = 60;
    size_t per_class_test = 20;
    double noise_sigma = 0.07;
    size_t ood_count = 200;
};

struct PoolConfig {
    std::vector<size_t> target_hidden = {48};
    std::vector<std::vector<size_t>> verifier_hidden = {
        {32}, {20, 20}, {64}, {14, 14, 14}, {48, 24}};
    size_t epochs = 60;
    size_t batch_size = 32;
    double learning_rate = 0.02;
    double momentum = 0.9;
    // Verifiers train on a stratified per-model subsample of this size;
    // the target model always sees the full training set. 1.0 disables
    // subsampling. Varying the training data decorrelates pool members.
    double train_fraction = 0.7;
    // Each verifier additionally trains with a private random subset of
    // pixels blanked to mid-gray, so members key on different image
    // regions (random-subspace diversity). 0 disables masking; the
    // target model is never masked.
    double mask_fraction = 0.25;
};

struct EnsemblesConfig {
    std::string kappa_eval = "negative";  // or "benign"
    double kappa_attack_epsilon = 0.06;   // fgsm strength for negative examples
    size_t kappa_inputs = 100;            // cap on kappa evaluation inputs
    double kappa_threshold = 1.0;         // prune teams with higher kappa_avg
    size_t team_size = 0;                 // 0 = keep all team sizes
};

struct DefenseSection {
    std::vector<DenoiserSpec> denoisers;
    ConsensusRule rule = ConsensusRule::Plurality;
    double confidence_level = 0.5;
    bool include_target_vote = true;
    size_t top_m = 3;
};

struct ThreatConfig {
    AttackConfig attack;     // defaults to cw2/most, see parse_config
    size_t inputs = 50;
    size_t grey_exposed = 2; // verifiers revealed to grey-box attackers
    double confidence_level = -1.0;  // negative = inherit defense.confidence_level
};

struct ExperimentConfig {
    uint64_t seed = 7;
    int workers = 1;
    TimingMode timing = TimingMode::Work;
    DatasetConfig dataset;
    PoolConfig pool;
    size_t attack_inputs = 100;
    std::vector<AttackConfig> attacks;   // non-empty after parsing
    EnsemblesConfig ensembles;
    DefenseSection defense;
    ThreatConfig threat;
    PerceptVariant percept = PerceptVariant::Standard;

    std::vector<std::string> verifier_ids() const;
    static const char* target_id() { return "tm"; }
};

// Strict parser: "version" must equal 1 and unknown keys anywhere in the
// document are rejected. Missing keys fall back to the defaults above.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Default attack list used when the document has no "attacks" array.
std::vector<AttackConfig> default_attacks();

}  // namespace xens
