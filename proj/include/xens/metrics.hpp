#pragma once

#include <vector>

#include "xens/attacks.hpp"
#include "xens/defense.hpp"
#include "xens/model.hpp"

namespace xens {

// Outcome rates over one verdict batch. PSR counts verdicts whose label
// equals the ground truth, TSR counts Flagged verdicts, and
// DSR = PSR + TSR holds exactly because the two cases are disjoint.
struct DefenseRates {
    size_t n = 0;
    double psr = 0.0;  // prevention: correct final label
    double tsr = 0.0;  // trapping: flagged
    double dsr = 0.0;
};

// truth[i] is the true label, or -1 for out-of-distribution inputs
// (which can never be "correctly labeled", only flagged).
DefenseRates defense_rates(const std::vector<Verdict>& verdicts,
                           const std::vector<int>& truth);

// beta * (1 - TPR) + (1 - beta) * FPR, the balanced miss/false-alarm
// cost at one operating point.
double detection_error(double tpr, double fpr, double beta = 0.5);

// Rank-sum AUROC of positive scores (class of interest, higher
// expected) against negative scores. Ties count one half.
double auroc(const std::vector<double>& negatives, const std::vector<double>& positives);

// Lowest achievable FPR among thresholds whose TPR reaches
// tpr_target. Classification is score >= threshold -> positive.
double fpr_at_tpr(const std::vector<double>& negatives, const std::vector<double>& positives,
                  double tpr_target);

enum class TransferMode { Untargeted, Targeted };

// Core rate over pre-computed labels: restricted to examples where the
// `from` labels show attack success, the share for which `to` shows the
// same deception (same wrong label, or the target label).
double transfer_rate(const std::vector<int>& true_labels,
                     const std::vector<int>& target_labels,
                     const std::vector<int>& from_labels,
                     const std::vector<int>& to_labels, TransferMode mode);

// Convenience wrapper running both models over the perturbed inputs.
double transferability(const std::vector<AdversarialExample>& examples,
                       const MicroModel& from, const MicroModel& to, TransferMode mode);

}  // namespace xens
