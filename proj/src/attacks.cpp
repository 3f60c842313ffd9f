#include "xens/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xens/error.hpp"
#include "xens/hexcodec.hpp"
#include "xens/rng.hpp"

namespace xens {

using json = nlohmann::ordered_json;

std::string attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::Fgsm: return "fgsm";
        case AttackKind::Bim: return "bim";
        case AttackKind::Pgd: return "pgd";
        case AttackKind::Cw2: return "cw2";
        case AttackKind::Jsma: return "jsma";
    }
    fail_invalid("bad attack kind");
}

AttackKind attack_kind_from_name(const std::string& s) {
    if (s == "fgsm") return AttackKind::Fgsm;
    if (s == "bim") return AttackKind::Bim;
    if (s == "pgd") return AttackKind::Pgd;
    if (s == "cw2") return AttackKind::Cw2;
    if (s == "jsma") return AttackKind::Jsma;
    fail_config("unknown attack kind '" + s + "'");
}

std::string target_mode_name(TargetMode m) {
    switch (m) {
        case TargetMode::Untargeted: return "untargeted";
        case TargetMode::Most: return "most";
        case TargetMode::LeastLikely: return "least-likely";
    }
    fail_invalid("bad target mode");
}

TargetMode target_mode_from_name(const std::string& s) {
    if (s == "untargeted") return TargetMode::Untargeted;
    if (s == "most") return TargetMode::Most;
    if (s == "least-likely" || s == "ll") return TargetMode::LeastLikely;
    fail_config("unknown target mode '" + s + "'");
}

void AttackConfig::validate() const {
    if (epsilon < 0) fail_config("attack epsilon must be non-negative");
    if (max_distortion < 0 || max_distortion > 1)
        fail_config("jsma max_distortion must be in [0,1]");
    if (kind == AttackKind::Bim || kind == AttackKind::Pgd) {
        if (!(step > 0)) fail_config("iterative attacks need a positive step");
        if (max_iters < 1) fail_config("iterative attacks need max_iters >= 1");
    }
    if (kind == AttackKind::Pgd && restarts < 1)
        fail_config("pgd needs at least one restart");
    if (kind == AttackKind::Cw2) {
        if (target_mode == TargetMode::Untargeted)
            fail_config("cw2 runs targeted only (most or least-likely)");
        if (!(step > 0)) fail_config("cw2 needs a positive learning rate (step)");
        if (max_iters < 1) fail_config("cw2 needs max_iters >= 1");
        if (check_every < 1) fail_config("cw2 check_every must be >= 1");
        if (confidence < 0) fail_config("cw2 confidence must be non-negative");
        if (!(cw_c > 0)) fail_config("cw2 trade-off constant must be positive");
    }
    if (kind == AttackKind::Jsma && target_mode == TargetMode::Untargeted)
        fail_config("jsma runs targeted only (most or least-likely)");
}

int select_target(const PredictionVector& pred, TargetMode mode) {
    if (pred.probs.size() < 2) fail_invalid("select_target: need at least 2 classes");
    if (mode == TargetMode::Untargeted)
        fail_invalid("select_target: untargeted attacks have no target");
    if (mode == TargetMode::LeastLikely) {
        size_t best = 0;
        for (size_t i = 1; i < pred.probs.size(); ++i)
            if (pred.probs[i] < pred.probs[best]) best = i;
        return int(best);
    }
    // Most: runner-up, i.e. argmax over classes other than the prediction.
    int best = -1;
    for (size_t i = 0; i < pred.probs.size(); ++i) {
        if (int(i) == pred.label) continue;
        if (best < 0 || pred.probs[i] > pred.probs[size_t(best)]) best = int(i);
    }
    return best;
}

namespace {

using Models = std::vector<const MicroModel*>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

void check_models(const Models& models, const Tensor& x) {
    if (models.empty()) fail_invalid("attack needs at least one model");
    for (const MicroModel* m : models) {
        if (!m) fail_invalid("attack: null model");
        if (m->input_dim() != x.size()) fail_dim("attack: input size mismatch");
        if (m->num_classes() != models[0]->num_classes())
            fail_dim("attack: exposed models disagree on class count");
    }
}

// Goal test across every exposed model. One forward per model.
bool goal_reached(const Models& models, const Tensor& x, int true_label,
                  int target_label, TargetMode mode, uint64_t& evals) {
    for (const MicroModel* m : models) {
        const int label = m->forward(x).label;
        ++evals;
        if (mode == TargetMode::Untargeted) {
            if (label == true_label) return false;
        } else {
            if (label != target_label) return false;
        }
    }
    return true;
}

// Mean cross-entropy gradient over the exposed models. Two work units
// per model (forward + backward).
std::vector<double> mean_loss_gradient(const Models& models, const Tensor& x,
                                       int label, uint64_t& evals) {
    std::vector<double> g(x.size(), 0.0);
    for (const MicroModel* m : models) {
        const std::vector<double> gm = m->input_gradient(x, label);
        evals += 2;
        for (size_t i = 0; i < g.size(); ++i) g[i] += gm[i];
    }
    const double inv = 1.0 / double(models.size());
    for (double& v : g) v *= inv;
    return g;
}

double mean_loss(const Models& models, const Tensor& x, int label, uint64_t& evals) {
    double acc = 0.0;
    for (const MicroModel* m : models) {
        acc += m->loss(x, label);
        ++evals;
    }
    return acc / double(models.size());
}

Tensor project_ball(const Tensor& cand, const Tensor& origin, double eps) {
    Tensor out = cand;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double lo = origin.data[i] - eps, hi = origin.data[i] + eps;
        out.data[i] = std::clamp(std::clamp(out.data[i], lo, hi), 0.0, 1.0);
    }
    return out;
}

int resolve_target(const Models& models, const Tensor& x, TargetMode mode,
                   uint64_t& evals) {
    if (mode == TargetMode::Untargeted) return -1;
    const PredictionVector pv = models[0]->forward(x);
    ++evals;
    return select_target(pv, mode);
}

AdversarialExample make_example(const Tensor& x, const Tensor& adv, int true_label,
                                int target_label, bool success, uint64_t evals,
                                Clock::time_point t0) {
    AdversarialExample ex;
    ex.original = x;
    ex.perturbed = adv;
    ex.true_label = true_label;
    ex.target_label = target_label;
    ex.success = success;
    ex.gen_evals = evals;
    ex.gen_time_s = seconds_since(t0);
    return ex;
}

AdversarialExample fgsm_impl(const Models& models, const Tensor& x, int true_label,
                             const AttackConfig& cfg) {
    const auto t0 = Clock::now();
    uint64_t evals = 0;
    const int target = resolve_target(models, x, cfg.target_mode, evals);
    const int grad_label = cfg.target_mode == TargetMode::Untargeted ? true_label : target;
    const double dir = cfg.target_mode == TargetMode::Untargeted ? 1.0 : -1.0;
    const std::vector<double> g = mean_loss_gradient(models, x, grad_label, evals);
    Tensor adv = x;
    for (size_t i = 0; i < adv.data.size(); ++i)
        adv.data[i] = std::clamp(adv.data[i] + dir * cfg.epsilon * sign(g[i]), 0.0, 1.0);
    const bool ok = goal_reached(models, adv, true_label, target, cfg.target_mode, evals);
    return make_example(x, adv, true_label, target, ok, evals, t0);
}

struct IterResult {
    Tensor x;
    bool success = false;
    double loss = 0.0;  // mean loss at the final iterate
};

// Shared bim/pgd loop: sign-gradient steps projected back into the
// epsilon ball, stopping at the first iterate that reaches the goal.
IterResult iterated_fgsm(const Models& models, const Tensor& origin, const Tensor& start,
                         int true_label, int target, const AttackConfig& cfg,
                         uint64_t& evals) {
    const int grad_label = cfg.target_mode == TargetMode::Untargeted ? true_label : target;
    const double dir = cfg.target_mode == TargetMode::Untargeted ? 1.0 : -1.0;
    Tensor cur = project_ball(start, origin, cfg.epsilon);
    for (size_t it = 0; it < cfg.max_iters; ++it) {
        if (goal_reached(models, cur, true_label, target, cfg.target_mode, evals))
            return {cur, true, mean_loss(models, cur, grad_label, evals)};
        const std::vector<double> g = mean_loss_gradient(models, cur, grad_label, evals);
        for (size_t i = 0; i < cur.data.size(); ++i)
            cur.data[i] += dir * cfg.step * sign(g[i]);
        cur = project_ball(cur, origin, cfg.epsilon);
    }
    const bool ok = goal_reached(models, cur, true_label, target, cfg.target_mode, evals);
    return {cur, ok, mean_loss(models, cur, grad_label, evals)};
}

AdversarialExample pgd_impl(const Models& models, const Tensor& x, int true_label,
                            const AttackConfig& cfg) {
    const auto t0 = Clock::now();
    uint64_t evals = 0;
    const int target = resolve_target(models, x, cfg.target_mode, evals);
    const Rng base(cfg.seed);
    IterResult best;
    bool have_best = false;
    for (size_t r = 0; r < cfg.restarts; ++r) {
        Tensor start = x;
        if (cfg.random_start) {
            Rng rng = base.child(r);
            for (double& v : start.data) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
        }
        IterResult res = iterated_fgsm(models, x, start, true_label, target, cfg, evals);
        if (res.success)
            return make_example(x, res.x, true_label, target, true, evals, t0);
        // keep the strongest failed attempt: highest loss away from the
        // true label, or lowest loss toward the target
        const bool better =
            !have_best || (cfg.target_mode == TargetMode::Untargeted ? res.loss > best.loss
                                                                     : res.loss < best.loss);
        if (better) {
            best = std::move(res);
            have_best = true;
        }
    }
    return make_example(x, best.x, true_label, target, false, evals, t0);
}

AdversarialExample bim_impl(const Models& models, const Tensor& x, int true_label,
                            const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.restarts = 1;
    c.random_start = false;
    return pgd_impl(models, x, true_label, c);
}

AdversarialExample cw2_impl(const Models& models, const Tensor& x, int true_label,
                            const AttackConfig& cfg) {
    const auto t0 = Clock::now();
    uint64_t evals = 0;
    const int target = resolve_target(models, x, cfg.target_mode, evals);
    const size_t n = x.size();
    const size_t K = models[0]->num_classes();

    // tanh-space variable; the 0.999999 squeeze keeps atanh finite at the
    // box boundary
    std::vector<double> w(n);
    for (size_t i = 0; i < n; ++i) {
        const double v = std::clamp(x.data[i], 0.0, 1.0) * 2.0 - 1.0;
        w[i] = std::atanh(v * 0.999999);
    }

    Tensor cand = x;
    Tensor best;
    double best_l2 = 0.0;
    bool have_best = false;

    auto to_image = [&](Tensor& out) {
        for (size_t i = 0; i < n; ++i) out.data[i] = (std::tanh(w[i]) + 1.0) * 0.5;
    };

    for (size_t it = 0; it <= cfg.max_iters; ++it) {
        to_image(cand);

        // per-model logits; hinge max(Z_other - Z_target, -confidence)
        double mean_hinge_grad_scale = 1.0 / double(models.size());
        std::vector<double> dx(n, 0.0);
        bool all_confident = true;
        for (const MicroModel* m : models) {
            const std::vector<double> z = m->logits(cand);
            ++evals;
            size_t jmax = size_t(target) == 0 ? 1 : 0;
            for (size_t j = 0; j < K; ++j)
                if (j != size_t(target) && z[j] > z[jmax]) jmax = j;
            const double margin = z[size_t(target)] - z[jmax];
            if (margin < cfg.confidence) all_confident = false;
            if (z[jmax] - z[size_t(target)] > -cfg.confidence) {
                // hinge active: gradient of Z_jmax - Z_target
                std::vector<double> seed(K, 0.0);
                seed[jmax] = 1.0;
                seed[size_t(target)] = -1.0;
                const std::vector<double> gm = m->logit_seed_gradient(cand, seed);
                evals += 2;
                for (size_t i = 0; i < n; ++i) dx[i] += gm[i] * mean_hinge_grad_scale;
            }
        }

        const bool checkpoint = (it % cfg.check_every == 0) || it == cfg.max_iters;
        if (checkpoint && all_confident) {
            const double l2 = l2_distance(cand, x);
            if (!have_best || l2 < best_l2) {
                best = cand;
                best_l2 = l2;
                have_best = true;
            }
        }
        if (it == cfg.max_iters) break;

        for (size_t i = 0; i < n; ++i) {
            const double th = std::tanh(w[i]);
            const double dldx = 2.0 * (cand.data[i] - x.data[i]) + cfg.cw_c * dx[i];
            w[i] -= cfg.step * dldx * (1.0 - th * th) * 0.5;
        }
    }

    if (have_best)
        return make_example(x, best, true_label, target, true, evals, t0);
    to_image(cand);
    return make_example(x, cand, true_label, target, false, evals, t0);
}

AdversarialExample jsma_impl(const Models& models, const Tensor& x, int true_label,
                             int target, const AttackConfig& cfg) {
    const auto t0 = Clock::now();
    uint64_t evals = 0;
    const size_t n = x.size();
    const size_t K = models[0]->num_classes();
    if (target < 0 || size_t(target) >= K) fail_invalid("jsma: target out of range");
    const size_t budget = size_t(std::ceil(cfg.max_distortion * double(n)));

    Tensor adv = x;
    std::set<size_t> changed;
    bool success = false;

    for (;;) {
        success = goal_reached(models, adv, true_label, target, TargetMode::Most, evals);
        if (success || changed.size() >= budget) break;

        // mean probability jacobian across the exposed models
        Tensor jac({K, n}, 0.0);
        for (const MicroModel* m : models) {
            const Tensor jm = m->jacobian(adv);
            evals += 1 + K;
            for (size_t i = 0; i < jac.data.size(); ++i) jac.data[i] += jm.data[i];
        }
        const double inv = 1.0 / double(models.size());
        for (double& v : jac.data) v *= inv;

        std::vector<double> alpha(n), beta(n);
        for (size_t p = 0; p < n; ++p) {
            double colsum = 0.0;
            for (size_t j = 0; j < K; ++j) colsum += jac.data[j * n + p];
            alpha[p] = jac.data[size_t(target) * n + p];
            beta[p] = colsum - alpha[p];
        }

        std::vector<size_t> domain;
        for (size_t p = 0; p < n; ++p)
            if (!changed.count(p) && adv.data[p] < 1.0 - 1e-12) domain.push_back(p);
        if (domain.empty()) break;

        const size_t room = budget - changed.size();
        long best_p = -1, best_q = -1;
        double best_score = 0.0;
        if (room >= 2) {
            // standard pixel-pair saliency: increase both pixels of the
            // pair that most helps the target while hurting the rest
            for (size_t ii = 0; ii < domain.size(); ++ii) {
                for (size_t jj = ii + 1; jj < domain.size(); ++jj) {
                    const double a = alpha[domain[ii]] + alpha[domain[jj]];
                    const double b = beta[domain[ii]] + beta[domain[jj]];
                    if (a <= 0.0 || b >= 0.0) continue;
                    const double score = -a * b;
                    if (score > best_score) {
                        best_score = score;
                        best_p = long(domain[ii]);
                        best_q = long(domain[jj]);
                    }
                }
            }
        }
        if (best_p < 0) {
            // single-pixel fallback
            for (size_t p : domain) {
                if (alpha[p] <= 0.0 || beta[p] >= 0.0) continue;
                const double score = -alpha[p] * beta[p];
                if (score > best_score) {
                    best_score = score;
                    best_p = long(p);
                    best_q = -1;
                }
            }
        }
        if (best_p < 0) break;  // no saliency left, give up

        adv.data[size_t(best_p)] = 1.0;
        changed.insert(size_t(best_p));
        if (best_q >= 0) {
            adv.data[size_t(best_q)] = 1.0;
            changed.insert(size_t(best_q));
        }
    }

    return make_example(x, adv, true_label, target, success, evals, t0);
}

AdversarialExample dispatch(const Models& models, const Tensor& x, int true_label,
                            const AttackConfig& cfg) {
    cfg.validate();
    check_models(models, x);
    if (true_label < 0 || size_t(true_label) >= models[0]->num_classes())
        fail_invalid("attack: true label out of range");
    switch (cfg.kind) {
        case AttackKind::Fgsm: return fgsm_impl(models, x, true_label, cfg);
        case AttackKind::Bim: return bim_impl(models, x, true_label, cfg);
        case AttackKind::Pgd: return pgd_impl(models, x, true_label, cfg);
        case AttackKind::Cw2: return cw2_impl(models, x, true_label, cfg);
        case AttackKind::Jsma: {
            uint64_t evals = 0;
            const int target = resolve_target(models, x, cfg.target_mode, evals);
            AdversarialExample ex = jsma_impl(models, x, true_label, target, cfg);
            ex.gen_evals += evals;
            return ex;
        }
    }
    fail_invalid("unknown attack kind");
}

}  // namespace

AdversarialExample fgsm(const MicroModel& model, const Tensor& x, int true_label,
                        const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.kind = AttackKind::Fgsm;
    return dispatch({&model}, x, true_label, c);
}

AdversarialExample bim(const MicroModel& model, const Tensor& x, int true_label,
                       const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.kind = AttackKind::Bim;
    return dispatch({&model}, x, true_label, c);
}

AdversarialExample pgd(const MicroModel& model, const Tensor& x, int true_label,
                       const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.kind = AttackKind::Pgd;
    return dispatch({&model}, x, true_label, c);
}

AdversarialExample cw2(const MicroModel& model, const Tensor& x, int true_label,
                       const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.kind = AttackKind::Cw2;
    return dispatch({&model}, x, true_label, c);
}

AdversarialExample jsma(const MicroModel& model, const Tensor& x, int true_label,
                        int target_label, const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.kind = AttackKind::Jsma;
    c.validate();
    check_models({&model}, x);
    return jsma_impl({&model}, x, true_label, target_label, c);
}

AdversarialExample run_attack(const MicroModel& model, const Tensor& x, int true_label,
                              const AttackConfig& cfg) {
    return dispatch({&model}, x, true_label, cfg);
}

AdversarialExample ensemble_attack(const std::vector<const MicroModel*>& models,
                                   const Tensor& x, int true_label,
                                   const AttackConfig& cfg) {
    return dispatch(models, x, true_label, cfg);
}

AttackReport evaluate_attack(const MicroModel& model,
                             const std::vector<AdversarialExample>& examples,
                             const AttackConfig& cfg, PerceptVariant variant) {
    if (examples.empty()) fail_invalid("evaluate_attack: empty example list");
    AttackReport rep;
    rep.attack = attack_kind_name(cfg.kind);
    rep.mode = target_mode_name(cfg.target_mode);
    rep.n_examples = examples.size();
    double conf_sum = 0.0, perturb_sum = 0.0, percept_sum = 0.0;
    double time_sum = 0.0, eval_sum = 0.0;
    size_t mis = 0;
    for (const AdversarialExample& ex : examples) {
        const PredictionVector pv = model.forward(ex.perturbed);
        if (pv.label != ex.true_label) ++mis;
        const bool ok = cfg.target_mode == TargetMode::Untargeted
                            ? pv.label != ex.true_label
                            : pv.label == ex.target_label;
        if (ok) {
            ++rep.n_success;
            conf_sum += pv.confidence;
            double sq = 0.0;
            for (size_t i = 0; i < ex.original.size(); ++i) {
                const double d = ex.perturbed.data[i] - ex.original.data[i];
                sq += d * d;
            }
            perturb_sum += std::sqrt(sq / double(ex.original.size()));
            percept_sum += percept_distance(ex.original, ex.perturbed, variant);
        }
        time_sum += ex.gen_time_s;
        eval_sum += double(ex.gen_evals);
    }
    const double n = double(examples.size());
    rep.asr = double(rep.n_success) / n;
    rep.mr = double(mis) / n;
    if (rep.n_success > 0) {
        rep.adv_conf = conf_sum / double(rep.n_success);
        rep.perturb = perturb_sum / double(rep.n_success);
        rep.percept = percept_sum / double(rep.n_success);
    }
    rep.mean_time_s = time_sum / n;
    rep.mean_evals = eval_sum / n;
    return rep;
}

double percept_distance(const Tensor& original, const Tensor& perturbed,
                        PerceptVariant variant) {
    if (!original.same_shape(perturbed)) fail_dim("percept_distance: shape mismatch");
    if (original.shape.size() != 2) fail_dim("percept_distance: image must be 2-D");
    const long rows = long(original.rows()), cols = long(original.cols());
    const double total = double(rows) * double(cols);
    double acc = 0.0;
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            // 3x3 neighborhood clipped at the borders: 9, 6 or 4 samples
            double sum = 0.0;
            size_t cnt = 0;
            for (long dr = -1; dr <= 1; ++dr) {
                for (long dc = -1; dc <= 1; ++dc) {
                    const long rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                    sum += original.at(size_t(rr), size_t(cc)) * 255.0;
                    ++cnt;
                }
            }
            const double mean = sum / double(cnt);
            double pstd;
            if (variant == PerceptVariant::Standard) {
                double var = 0.0;
                for (long dr = -1; dr <= 1; ++dr) {
                    for (long dc = -1; dc <= 1; ++dc) {
                        const long rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                        const double d = original.at(size_t(rr), size_t(cc)) * 255.0 - mean;
                        var += d * d;
                    }
                }
                pstd = std::sqrt(var / double(cnt));
            } else {
                // as-printed variant: sqrt of the (clamped) un-squared
                // deviation sum over the total pixel count
                const double vi = original.at(size_t(r), size_t(c)) * 255.0;
                const double dev = double(cnt) * (vi - mean);
                pstd = std::sqrt(std::max(0.0, dev) / total);
            }
            const double sen = pstd <= 1.0 ? 1.0 : 1.0 / pstd;
            const double delta =
                std::fabs(perturbed.at(size_t(r), size_t(c)) - original.at(size_t(r), size_t(c))) *
                255.0;
            acc += delta * sen;
        }
    }
    return acc / total;
}

void save_adv_batch(const AdvBatch& batch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_data("cannot open '" + path + "' for writing");
    json meta;
    meta["version"] = 1;
    meta["attack"] = batch.attack;
    meta["mode"] = batch.mode;
    meta["source"] = batch.source;
    meta["side"] = batch.side;
    meta["count"] = batch.examples.size();
    out << meta.dump() << "\n";
    for (const AdversarialExample& ex : batch.examples) {
        json line;
        line["id"] = ex.id;
        line["source_index"] = ex.source_index;
        line["true_label"] = ex.true_label;
        line["target_label"] = ex.target_label;
        line["success"] = ex.success;
        line["gen_time_s"] = ex.gen_time_s;
        line["gen_evals"] = ex.gen_evals;
        line["original"] = encode_doubles_hex(ex.original.data);
        line["perturbed"] = encode_doubles_hex(ex.perturbed.data);
        out << line.dump() << "\n";
    }
    if (!out) fail_data("failed writing '" + path + "'");
}

AdvBatch load_adv_batch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_data("cannot open adversarial batch '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail_data("adversarial batch '" + path + "' is empty");
    AdvBatch batch;
    size_t count = 0;
    try {
        const json meta = json::parse(line);
        if (meta.at("version").get<int>() != 1)
            fail_data("unsupported adversarial batch version in '" + path + "'");
        batch.attack = meta.at("attack").get<std::string>();
        batch.mode = meta.at("mode").get<std::string>();
        batch.source = meta.at("source").get<std::string>();
        batch.side = meta.at("side").get<size_t>();
        count = meta.at("count").get<size_t>();
    } catch (const json::exception& e) {
        fail_data("adversarial batch metadata error in '" + path + "': " + e.what());
    }
    const size_t pixels = batch.side * batch.side;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            AdversarialExample ex;
            ex.id = j.at("id").get<size_t>();
            ex.source_index = j.at("source_index").get<size_t>();
            ex.true_label = j.at("true_label").get<int>();
            ex.target_label = j.at("target_label").get<int>();
            ex.success = j.at("success").get<bool>();
            ex.gen_time_s = j.at("gen_time_s").get<double>();
            ex.gen_evals = j.at("gen_evals").get<uint64_t>();
            ex.original = Tensor({batch.side, batch.side},
                                 decode_doubles_hex(j.at("original").get<std::string>(),
                                                    pixels, "line " + std::to_string(lineno)));
            ex.perturbed = Tensor({batch.side, batch.side},
                                  decode_doubles_hex(j.at("perturbed").get<std::string>(),
                                                     pixels, "line " + std::to_string(lineno)));
            batch.examples.push_back(std::move(ex));
        } catch (const json::exception& e) {
            fail_data("adversarial batch line " + std::to_string(lineno) + " in '" + path +
                      "': " + e.what());
        }
    }
    if (batch.examples.size() != count)
        fail_data("adversarial batch '" + path + "' is truncated: expected " +
                  std::to_string(count) + " examples, found " +
                  std::to_string(batch.examples.size()));
    return batch;
}

}  // namespace xens
