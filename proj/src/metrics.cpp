#include "xens/metrics.hpp"

#include <algorithm>

#include "xens/error.hpp"

namespace xens {

DefenseRates defense_rates(const std::vector<Verdict>& verdicts,
                           const std::vector<int>& truth) {
    if (verdicts.empty()) fail_invalid("defense_rates: no verdicts");
    if (verdicts.size() != truth.size())
        fail_invalid("defense_rates: verdict/truth length mismatch");
    DefenseRates r;
    r.n = verdicts.size();
    size_t prevented = 0, trapped = 0;
    for (size_t i = 0; i < verdicts.size(); ++i) {
        if (verdicts[i].outcome == VerdictOutcome::Flagged) {
            ++trapped;
        } else if (truth[i] >= 0 && verdicts[i].label == truth[i]) {
            ++prevented;
        }
    }
    r.psr = double(prevented) / double(r.n);
    r.tsr = double(trapped) / double(r.n);
    r.dsr = r.psr + r.tsr;
    return r;
}

double detection_error(double tpr, double fpr, double beta) {
    if (!(tpr >= 0.0 && tpr <= 1.0)) fail_invalid("detection_error: TPR outside [0,1]");
    if (!(fpr >= 0.0 && fpr <= 1.0)) fail_invalid("detection_error: FPR outside [0,1]");
    if (!(beta >= 0.0 && beta <= 1.0)) fail_invalid("detection_error: beta outside [0,1]");
    return beta * (1.0 - tpr) + (1.0 - beta) * fpr;
}

double auroc(const std::vector<double>& negatives, const std::vector<double>& positives) {
    if (negatives.empty() || positives.empty())
        fail_invalid("auroc: need both negative and positive scores");
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(negatives.size() + positives.size());
    for (double s : negatives) all.push_back({s, false});
    for (double s : positives) all.push_back({s, true});
    std::sort(all.begin(), all.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // average ranks over tie runs, then the Mann-Whitney identity
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        const double avg_rank = 0.5 * (double(i + 1) + double(j));  // 1-based
        for (size_t k = i; k < j; ++k)
            if (all[k].positive) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = double(positives.size()), nn = double(negatives.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double fpr_at_tpr(const std::vector<double>& negatives, const std::vector<double>& positives,
                  double tpr_target) {
    if (negatives.empty() || positives.empty())
        fail_invalid("fpr_at_tpr: need both negative and positive scores");
    if (!(tpr_target > 0.0 && tpr_target <= 1.0))
        fail_invalid("fpr_at_tpr: target TPR must be in (0,1]");

    // Candidate thresholds: every score. TPR falls as the threshold
    // rises, so take the highest threshold still meeting the target.
    std::vector<double> thresholds = positives;
    thresholds.insert(thresholds.end(), negatives.begin(), negatives.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    double best_fpr = -1.0;
    for (double t : thresholds) {
        size_t tp = 0;
        for (double s : positives)
            if (s >= t) ++tp;
        const double tpr = double(tp) / double(positives.size());
        if (tpr + 1e-12 < tpr_target) continue;
        size_t fp = 0;
        for (double s : negatives)
            if (s >= t) ++fp;
        const double fpr = double(fp) / double(negatives.size());
        if (best_fpr < 0.0 || fpr < best_fpr) best_fpr = fpr;
    }
    if (best_fpr < 0.0) fail_invalid("fpr_at_tpr: target TPR unreachable");
    return best_fpr;
}

double transfer_rate(const std::vector<int>& true_labels,
                     const std::vector<int>& target_labels,
                     const std::vector<int>& from_labels,
                     const std::vector<int>& to_labels, TransferMode mode) {
    const size_t n = true_labels.size();
    if (from_labels.size() != n || to_labels.size() != n ||
        (mode == TransferMode::Targeted && target_labels.size() != n))
        fail_invalid("transfer_rate: label vector length mismatch");
    size_t base = 0, transferred = 0;
    for (size_t i = 0; i < n; ++i) {
        if (mode == TransferMode::Untargeted) {
            if (from_labels[i] == true_labels[i]) continue;  // attack failed on source
            ++base;
            if (to_labels[i] == from_labels[i]) ++transferred;
        } else {
            if (from_labels[i] != target_labels[i]) continue;
            ++base;
            if (to_labels[i] == target_labels[i]) ++transferred;
        }
    }
    if (base == 0) fail_invalid("transfer_rate: no successful source examples");
    return double(transferred) / double(base);
}

double transferability(const std::vector<AdversarialExample>& examples,
                       const MicroModel& from, const MicroModel& to, TransferMode mode) {
    if (examples.empty()) fail_invalid("transferability: empty example list");
    std::vector<int> truth, targets, from_labels, to_labels;
    for (const AdversarialExample& ex : examples) {
        truth.push_back(ex.true_label);
        targets.push_back(ex.target_label);
        from_labels.push_back(from.forward(ex.perturbed).label);
        to_labels.push_back(to.forward(ex.perturbed).label);
    }
    return transfer_rate(truth, targets, from_labels, to_labels, mode);
}

}  // namespace xens
