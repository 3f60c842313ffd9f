#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xens/model.hpp"
#include "xens/tensor.hpp"

namespace xens {

enum class AttackKind { Fgsm, Bim, Pgd, Cw2, Jsma };
enum class TargetMode { Untargeted, Most, LeastLikely };

std::string attack_kind_name(AttackKind k);
AttackKind attack_kind_from_name(const std::string& s);
std::string target_mode_name(TargetMode m);
TargetMode target_mode_from_name(const std::string& s);

struct AttackConfig {
    AttackKind kind = AttackKind::Fgsm;
    TargetMode target_mode = TargetMode::Untargeted;
    double epsilon = 0.06;        // max-norm budget (fgsm step size)
    double step = 0.01;           // per-iteration step; cw2 learning rate
    size_t max_iters = 20;        // bim/pgd/cw2 iteration cap
    size_t restarts = 1;          // pgd random restarts
    bool random_start = true;     // pgd: start from a random point in the ball
    double confidence = 5.0;      // cw2 logit margin
    size_t check_every = 100;     // cw2 success-check period
    double cw_c = 1.0;            // cw2 distance/margin trade-off
    double max_distortion = 0.10; // jsma changed-pixel budget (fraction)
    uint64_t seed = 0;

    void validate() const;
};

struct AdversarialExample {
    size_t id = 0;
    size_t source_index = 0;
    Tensor original;
    Tensor perturbed;
    int true_label = -1;
    int target_label = -1;   // -1 for untargeted
    bool success = false;
    double gen_time_s = 0.0; // wall clock
    uint64_t gen_evals = 0;  // deterministic work units, see README
};

enum class PerceptVariant { Standard, Literal };

struct AttackReport {
    std::string attack;       // kind name
    std::string mode;         // target mode name
    size_t n_examples = 0;
    size_t n_success = 0;
    double asr = 0.0;         // attack goal reached
    double mr = 0.0;          // misclassified at all
    double adv_conf = 0.0;    // mean confidence on the adversarial label
    double perturb = 0.0;     // mean root-mean-square perturbation
    double percept = 0.0;     // mean sensitivity-weighted distortion
    double mean_time_s = 0.0;
    double mean_evals = 0.0;
};

// Attack target for targeted modes: Most = runner-up class (argmax over
// classes other than the predicted one), LeastLikely = argmin. Ties go
// to the smallest index.
int select_target(const PredictionVector& pred, TargetMode mode);

// Single-model white-box attacks. Each returns the perturbed input, the
// goal outcome, wall time, and deterministic work units.
AdversarialExample fgsm(const MicroModel& model, const Tensor& x, int true_label,
                        const AttackConfig& cfg);
AdversarialExample bim(const MicroModel& model, const Tensor& x, int true_label,
                       const AttackConfig& cfg);
AdversarialExample pgd(const MicroModel& model, const Tensor& x, int true_label,
                       const AttackConfig& cfg);
AdversarialExample cw2(const MicroModel& model, const Tensor& x, int true_label,
                       const AttackConfig& cfg);
AdversarialExample jsma(const MicroModel& model, const Tensor& x, int true_label,
                        int target_label, const AttackConfig& cfg);

// Dispatch on cfg.kind; resolves jsma targets internally.
AdversarialExample run_attack(const MicroModel& model, const Tensor& x, int true_label,
                              const AttackConfig& cfg);

// Joint attack against several exposed models: the optimization loss is
// the mean of the per-model losses and the attack only counts as
// successful when every exposed model reaches the goal. Target selection
// uses models[0]. A single-model list reproduces the base attack exactly.
AdversarialExample ensemble_attack(const std::vector<const MicroModel*>& models,
                                   const Tensor& x, int true_label,
                                   const AttackConfig& cfg);

// Batch metrics as they appear in attack reports. `model` is the model
// the attack was aimed at (its labels define success).
AttackReport evaluate_attack(const MicroModel& model,
                             const std::vector<AdversarialExample>& examples,
                             const AttackConfig& cfg,
                             PerceptVariant variant = PerceptVariant::Standard);

// Human-perception-weighted distortion: mean over pixels of
// |delta_i| * Sen(i) on the 0..255 scale, where Sen(i) is 1 for flat
// 3x3 neighborhoods (population std <= 1) and 1/std otherwise.
// The Literal variant reproduces a non-squared std formula for
// comparison runs; see README.
double percept_distance(const Tensor& original, const Tensor& perturbed,
                        PerceptVariant variant = PerceptVariant::Standard);

struct AdvBatch {
    std::string attack;
    std::string mode;
    std::string source;  // dataset name the originals came from
    size_t side = 0;
    std::vector<AdversarialExample> examples;
};

// JSON-lines: one metadata line, then one example per line with both
// images hex encoded (bit exact).
void save_adv_batch(const AdvBatch& batch, const std::string& path);
AdvBatch load_adv_batch(const std::string& path);

}  // namespace xens
