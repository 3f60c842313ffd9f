#include "xens/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xens/attacks.hpp"
#include "xens/defense.hpp"
#include "xens/denoise.hpp"
#include "xens/diversity.hpp"
#include "xens/error.hpp"
#include "xens/metrics.hpp"
#include "xens/model.hpp"
#include "xens/parallel.hpp"
#include "xens/report.hpp"
#include "xens/rng.hpp"
#include "xens/synthdata.hpp"
#include "xens/tensor.hpp"
#include "xens/train.hpp"

namespace xens {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Seed streams hanging off the experiment seed. Every stage draws from
// its own child chain, so stages can be rerun in any combination without
// shifting each other's randomness.
constexpr uint64_t kStreamData = 1;
constexpr uint64_t kStreamModels = 2;
constexpr uint64_t kStreamAttacks = 3;
constexpr uint64_t kStreamDefense = 4;
constexpr uint64_t kStreamThreat = 5;
constexpr uint64_t kStreamKappa = 6;
constexpr uint64_t kStreamOod = 7;

uint64_t stream_seed(const ExperimentConfig& cfg, std::initializer_list<uint64_t> chain) {
    Rng r(cfg.seed);
    for (uint64_t c : chain) r = r.child(c);
    return r.seed();
}

fs::path out_path(const RunOptions& opt, const std::string& rel) {
    return fs::path(opt.out_dir) / rel;
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) fail_data("cannot create directory '" + p.string() + "': " + ec.message());
}

void echo_table(const Table& t, const RunOptions& opt) {
    if (opt.quiet) return;
    if (opt.format == "csv")
        std::cout << table_to_csv(t);
    else if (opt.format == "json")
        std::cout << table_to_json(t);
    else
        std::cout << table_to_text(t);
}

std::string join_ids(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string hidden_desc(const std::vector<size_t>& hidden) {
    std::string out;
    for (size_t i = 0; i < hidden.size(); ++i)
        out += (i ? "x" : "") + std::to_string(hidden[i]);
    return out.empty() ? "-" : out;
}

double time_value(const ExperimentConfig& cfg, double secs, double evals) {
    return cfg.timing == TimingMode::Work ? evals : secs;
}

// --- artifact plumbing -------------------------------------------------

Dataset need_dataset(const RunOptions& opt, const std::string& which) {
    const fs::path p = out_path(opt, "data/" + which + ".ds");
    if (!fs::exists(p))
        fail_data("missing dataset '" + p.string() + "'; run gen-data first");
    return load_dataset(p.string());
}

std::vector<std::string> pool_ids(const ExperimentConfig& cfg) {
    std::vector<std::string> ids{ExperimentConfig::target_id()};
    for (const auto& v : cfg.verifier_ids()) ids.push_back(v);
    return ids;
}

struct Pool {
    std::vector<std::string> ids;    // target first, then verifiers
    std::vector<MicroModel> models;  // aligned with ids

    std::map<std::string, const MicroModel*> map() const {
        std::map<std::string, const MicroModel*> m;
        for (size_t i = 0; i < ids.size(); ++i) m[ids[i]] = &models[i];
        return m;
    }
    const MicroModel& by_id(const std::string& id) const {
        for (size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return models[i];
        fail_invalid("unknown model id '" + id + "'");
    }
};

Pool load_pool(const ExperimentConfig& cfg, const RunOptions& opt) {
    Pool pool;
    pool.ids = pool_ids(cfg);
    for (const auto& id : pool.ids) {
        const fs::path p = out_path(opt, "models/" + id + ".json");
        if (!fs::exists(p))
            fail_data("missing model '" + p.string() + "'; run train-pool first");
        pool.models.push_back(MicroModel::load(p.string()));
    }
    return pool;
}

// First `n` test inputs the target model classifies correctly, in
// dataset order.
std::vector<size_t> first_correct(const MicroModel& tm, const Dataset& test, size_t n) {
    std::vector<size_t> sel;
    for (size_t i = 0; i < test.count() && sel.size() < n; ++i)
        if (tm.forward(test.images[i]).label == test.labels[i]) sel.push_back(i);
    return sel;
}

// File tag per configured attack: kind-mode, suffixed when repeated.
std::vector<std::string> attack_tags(const std::vector<AttackConfig>& attacks) {
    std::vector<std::string> tags;
    std::map<std::string, int> seen;
    for (const auto& a : attacks) {
        std::string base = attack_kind_name(a.kind) + "-" + target_mode_name(a.target_mode);
        const int k = ++seen[base];
        tags.push_back(k == 1 ? base : base + "-" + std::to_string(k));
    }
    return tags;
}

void save_ensembles(const RankedPool& ranked, const ExperimentConfig& cfg,
                    const fs::path& path) {
    json doc;
    doc["version"] = 1;
    doc["target"] = ExperimentConfig::target_id();
    doc["verifiers"] = cfg.verifier_ids();
    json teams = json::array();
    for (const EnsembleTeam& t : ranked.teams) {
        json tj;
        tj["ids"] = t.member_ids;
        tj["kappa_avg"] = t.kappa_avg;
        tj["benign_acc"] = t.benign_acc;
        teams.push_back(std::move(tj));
    }
    doc["teams"] = std::move(teams);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_data("cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << "\n";
    if (!out) fail_data("failed writing '" + path.string() + "'");
}

// Ranked serving teams (each contains the target model), in the ranking
// order stored by rank-ensembles.
RankedPool load_ensembles(const ExperimentConfig& cfg, const RunOptions& opt) {
    const fs::path p = out_path(opt, "ensembles.json");
    if (!fs::exists(p))
        fail_data("missing '" + p.string() + "'; run rank-ensembles first");
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    RankedPool ranked;
    try {
        const json doc = json::parse(ss.str());
        if (doc.at("version").get<int>() != 1)
            fail_data("unsupported ensembles file version in '" + p.string() + "'");
        const auto known = pool_ids(cfg);
        for (const json& tj : doc.at("teams")) {
            EnsembleTeam t;
            t.member_ids = tj.at("ids").get<std::vector<std::string>>();
            t.kappa_avg = tj.at("kappa_avg").get<double>();
            t.benign_acc = tj.at("benign_acc").get<double>();
            for (const auto& id : t.member_ids)
                if (std::find(known.begin(), known.end(), id) == known.end())
                    fail_data("ensembles file names unknown model '" + id +
                              "'; rerun rank-ensembles");
            if (std::find(t.member_ids.begin(), t.member_ids.end(),
                          ExperimentConfig::target_id()) == t.member_ids.end())
                fail_data("ensembles file holds a team without the target model; "
                          "rerun rank-ensembles");
            ranked.teams.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        fail_data("cannot parse '" + p.string() + "': " + std::string(e.what()));
    }
    if (ranked.teams.empty()) fail_data("'" + p.string() + "' contains no teams");
    return ranked;
}

RankedPool single_pool(std::vector<std::string> ids) {
    EnsembleTeam t;
    std::sort(ids.begin(), ids.end());
    t.member_ids = std::move(ids);
    RankedPool pool;
    pool.teams.push_back(std::move(t));
    return pool;
}

double team_vote_accuracy(const Pool& pool, const EnsembleTeam& team, const Dataset& data,
                          int workers) {
    std::vector<const MicroModel*> members;
    for (const auto& id : team.member_ids) members.push_back(&pool.by_id(id));
    std::vector<char> ok(data.count(), 0);
    parallel_for(data.count(), workers, [&](size_t i) {
        std::vector<PredictionVector> preds;
        preds.reserve(members.size());
        for (const MicroModel* m : members) preds.push_back(m->forward(data.images[i]));
        const ConsensusResult c = consensus(preds, ConsensusRule::Plurality);
        ok[i] = c.has_winner && c.label == data.labels[i] ? 1 : 0;
    });
    size_t hits = 0;
    for (char c : ok) hits += size_t(c);
    return data.count() ? double(hits) / double(data.count()) : 0.0;
}

}  // namespace

// --- gen-data ----------------------------------------------------------

void cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opt) {
    ensure_dir(out_path(opt, "data"));
    const DatasetConfig& d = cfg.dataset;
    const Dataset train =
        gen_in_distribution(d.classes, d.side, d.per_class_train, d.noise_sigma,
                            stream_seed(cfg, {kStreamData, 1}), "train");
    const Dataset test =
        gen_in_distribution(d.classes, d.side, d.per_class_test, d.noise_sigma,
                            stream_seed(cfg, {kStreamData, 2}), "test");
    const Dataset ood =
        gen_ood(d.side, d.ood_count, stream_seed(cfg, {kStreamData, 3}), "ood");
    save_dataset(train, out_path(opt, "data/train.ds").string());
    save_dataset(test, out_path(opt, "data/test.ds").string());
    save_dataset(ood, out_path(opt, "data/ood.ds").string());

    Table t{"datasets", {"set", "kind", "count", "side", "classes"}};
    auto row = [&](const Dataset& ds) {
        t.add_row({ds.name, ds.kind == DatasetKind::Ood ? "ood" : "in-distribution",
                   std::to_string(ds.count()), std::to_string(ds.side),
                   std::to_string(ds.classes)});
    };
    row(train);
    row(test);
    row(ood);
    echo_table(t, opt);
}

// --- train-pool --------------------------------------------------------

namespace {

// Per-model label vectors over the kappa evaluation set: either FGSM
// negatives crafted against the target model, or plain benign inputs.
std::vector<std::vector<int>> kappa_eval_labels(const ExperimentConfig& cfg,
                                                const std::vector<MicroModel>& models,
                                                const Dataset& test) {
    const MicroModel& tm = models[0];
    const bool negative = cfg.ensembles.kappa_eval == "negative";
    std::vector<size_t> sel;
    if (negative) {
        sel = first_correct(tm, test, cfg.ensembles.kappa_inputs);
    } else {
        for (size_t i = 0; i < std::min(test.count(), cfg.ensembles.kappa_inputs); ++i)
            sel.push_back(i);
    }
    if (sel.empty()) fail_data("no usable inputs for the kappa evaluation set");

    std::vector<Tensor> inputs(sel.size());
    if (negative) {
        parallel_for(sel.size(), cfg.workers, [&](size_t i) {
            AttackConfig a;
            a.kind = AttackKind::Fgsm;
            a.target_mode = TargetMode::Untargeted;
            a.epsilon = cfg.ensembles.kappa_attack_epsilon;
            a.seed = stream_seed(cfg, {kStreamKappa, i});
            inputs[i] = fgsm(tm, test.images[sel[i]], test.labels[sel[i]], a).perturbed;
        });
    } else {
        for (size_t i = 0; i < sel.size(); ++i) inputs[i] = test.images[sel[i]];
    }

    std::vector<std::vector<int>> labels(models.size(), std::vector<int>(sel.size()));
    parallel_for(models.size(), cfg.workers, [&](size_t m) {
        for (size_t i = 0; i < inputs.size(); ++i)
            labels[m][i] = models[m].forward(inputs[i]).label;
    });
    return labels;
}

}  // namespace

// Append the denoised variant of every image so each verification
// channel (raw and denoised alike) is on-distribution for the models
// that will vote on it.
Dataset augment_with_denoisers(const Dataset& d, const std::vector<DenoiserSpec>& specs) {
    Dataset out = d;
    for (const DenoiserSpec& spec : specs) {
        for (size_t i = 0; i < d.count(); ++i) {
            out.images.push_back(apply_denoiser(spec, d.images[i]));
            out.labels.push_back(d.labels[i]);
        }
    }
    return out;
}

// Blank a private random subset of pixels to mid-gray in every image
// (applied across all augmented variants alike), so the trained model
// keys on its own image regions. Random-subspace diversity: members
// with different masks learn decorrelated decision boundaries.
Dataset mask_pixels(Dataset d, double fraction, uint64_t seed) {
    const size_t dim = d.side * d.side;
    const size_t n = size_t(std::llround(fraction * double(dim)));
    if (n == 0) return d;
    std::vector<size_t> idx(dim);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(n);
    for (Tensor& img : d.images)
        for (size_t p : idx) img.data[p] = 0.5;
    return d;
}

// Per-class proportional draw without replacement, original order kept.
// Gives each verifier its own training view so pool members decorrelate.
Dataset stratified_subset(const Dataset& d, double fraction, uint64_t seed) {
    if (fraction >= 1.0) return d;
    std::vector<std::vector<size_t>> per_class(d.classes);
    for (size_t i = 0; i < d.count(); ++i) per_class[size_t(d.labels[i])].push_back(i);
    Rng rng(seed);
    std::vector<size_t> keep;
    for (auto& idx : per_class) {
        const size_t want = std::max<size_t>(
            1, size_t(std::llround(fraction * double(idx.size()))));
        rng.shuffle(idx);
        keep.insert(keep.end(), idx.begin(), idx.begin() + std::min(want, idx.size()));
    }
    std::sort(keep.begin(), keep.end());
    Dataset out;
    out.name = d.name;
    out.kind = d.kind;
    out.side = d.side;
    out.classes = d.classes;
    for (size_t i : keep) {
        out.images.push_back(d.images[i]);
        out.labels.push_back(d.labels[i]);
    }
    return out;
}

void cmd_train_pool(const ExperimentConfig& cfg, const RunOptions& opt) {
    const Dataset train_ds = need_dataset(opt, "train");
    const Dataset test_ds = need_dataset(opt, "test");
    if (train_ds.classes != cfg.dataset.classes || train_ds.side != cfg.dataset.side)
        fail_data("training set shape does not match the config; rerun gen-data");
    ensure_dir(out_path(opt, "models"));
    ensure_dir(out_path(opt, "reports"));

    const std::vector<std::string> ids = pool_ids(cfg);
    std::vector<std::vector<size_t>> hidden{cfg.pool.target_hidden};
    for (const auto& h : cfg.pool.verifier_hidden) hidden.push_back(h);

    const size_t input_dim = train_ds.side * train_ds.side;
    std::vector<MicroModel> models(ids.size());
    parallel_for(ids.size(), cfg.workers, [&](size_t i) {
        const MicroModel m0 =
            MicroModel::random(input_dim, hidden[i], train_ds.classes,
                               stream_seed(cfg, {kStreamModels, i, 0}));
        TrainConfig tc;
        tc.epochs = cfg.pool.epochs;
        tc.batch_size = cfg.pool.batch_size;
        tc.learning_rate = cfg.pool.learning_rate;
        tc.momentum = cfg.pool.momentum;
        tc.seed = stream_seed(cfg, {kStreamModels, i, 1});
        // i == 0 is the target model: it always trains on the full set,
        // unmasked. Verifiers get a subsample plus a private pixel mask.
        const Dataset view =
            i == 0 ? train_ds
                   : stratified_subset(train_ds, cfg.pool.train_fraction,
                                       stream_seed(cfg, {kStreamModels, i, 2}));
        Dataset aug = augment_with_denoisers(view, cfg.defense.denoisers);
        if (i > 0)
            aug = mask_pixels(std::move(aug), cfg.pool.mask_fraction,
                              stream_seed(cfg, {kStreamModels, i, 3}));
        models[i] = train(m0, aug, tc);
    });

    Table t{"pool_report", {"model", "hidden", "params", "train_acc", "test_acc"}};
    for (size_t i = 0; i < ids.size(); ++i) {
        models[i].save(out_path(opt, "models/" + ids[i] + ".json").string());
        size_t params = 0;
        for (const Layer& l : models[i].layers()) params += l.w.size() + l.b.size();
        t.add_row({ids[i], hidden_desc(hidden[i]), std::to_string(params),
                   fmt_num(accuracy(models[i], train_ds)),
                   fmt_num(accuracy(models[i], test_ds))});
    }

    const auto labels = kappa_eval_labels(cfg, models, test_ds);
    const auto km = kappa_matrix(labels, test_ds.classes);
    save_kappa_csv(ids, km, out_path(opt, "models/kappa_matrix.csv").string());

    write_table(t, out_path(opt, "reports").string());
    echo_table(t, opt);
}

// --- rank-ensembles ----------------------------------------------------

void cmd_rank_ensembles(const ExperimentConfig& cfg, const RunOptions& opt) {
    const Pool pool = load_pool(cfg, opt);
    const Dataset test = need_dataset(opt, "test");
    const fs::path kp = out_path(opt, "models/kappa_matrix.csv");
    if (!fs::exists(kp))
        fail_data("missing '" + kp.string() + "'; run train-pool first");
    const KappaTable kt = load_kappa_csv(kp.string());
    if (kt.model_ids != pool.ids)
        fail_data("kappa matrix does not match the model pool; rerun train-pool");

    // Serving candidates: the target model joined with every verifier
    // subset of size >= 2, scored by mean pairwise kappa over all
    // members (the target included).
    const auto teams =
        enumerate_defense_teams(cfg.verifier_ids(), ExperimentConfig::target_id());
    RankedPool ranked = rank_teams(teams, pool.ids, kt.kappa, cfg.ensembles.kappa_threshold);
    if (cfg.ensembles.team_size > 0) {
        std::vector<EnsembleTeam> keep;
        for (auto& t : ranked.teams)
            if (t.member_ids.size() == cfg.ensembles.team_size) keep.push_back(std::move(t));
        ranked.teams = std::move(keep);
    }
    if (ranked.teams.empty())
        fail_config("no candidate teams survive the kappa threshold and team size filter");

    for (EnsembleTeam& t : ranked.teams)
        t.benign_acc = team_vote_accuracy(pool, t, test, cfg.workers);

    save_ensembles(ranked, cfg, out_path(opt, "ensembles.json"));

    ensure_dir(out_path(opt, "reports"));
    Table rep{"ensemble_report", {"rank", "team", "size", "kappa_avg", "benign_acc"}};
    for (size_t i = 0; i < ranked.teams.size(); ++i) {
        const EnsembleTeam& t = ranked.teams[i];
        rep.add_row({std::to_string(i + 1), join_ids(t.member_ids, "+"),
                     std::to_string(t.member_ids.size()), fmt_num(t.kappa_avg),
                     fmt_num(t.benign_acc)});
    }
    write_table(rep, out_path(opt, "reports").string());
    echo_table(rep, opt);
}

// --- attack ------------------------------------------------------------

void cmd_attack(const ExperimentConfig& cfg, const RunOptions& opt) {
    const fs::path tmp = out_path(opt, std::string("models/") +
                                           ExperimentConfig::target_id() + ".json");
    if (!fs::exists(tmp))
        fail_data("missing model '" + tmp.string() + "'; run train-pool first");
    const MicroModel tm = MicroModel::load(tmp.string());
    const Dataset test = need_dataset(opt, "test");
    ensure_dir(out_path(opt, "attacks"));
    ensure_dir(out_path(opt, "reports"));

    const std::vector<size_t> sel = first_correct(tm, test, cfg.attack_inputs);
    const std::vector<std::string> tags = attack_tags(cfg.attacks);

    Table rep{"attack_report",
              {"attack", "mode", "n", "ASR", "MR", "AdvConf", "Perturb", "Percept", "Time"}};
    for (size_t ai = 0; ai < cfg.attacks.size(); ++ai) {
        const AttackConfig& base = cfg.attacks[ai];
        AdvBatch batch;
        batch.attack = attack_kind_name(base.kind);
        batch.mode = target_mode_name(base.target_mode);
        batch.source = test.name;
        batch.side = test.side;
        batch.examples.resize(sel.size());
        parallel_for(sel.size(), cfg.workers, [&](size_t i) {
            AttackConfig a = base;
            a.seed = stream_seed(cfg, {kStreamAttacks, ai, i});
            batch.examples[i] =
                run_attack(tm, test.images[sel[i]], test.labels[sel[i]], a);
            batch.examples[i].id = i;
            batch.examples[i].source_index = sel[i];
        });
        save_adv_batch(batch, out_path(opt, "attacks/" + tags[ai] + ".jsonl").string());

        if (batch.examples.empty()) {
            rep.add_row({batch.attack, batch.mode, "0", fmt_num(0), fmt_num(0), fmt_num(0),
                         fmt_num(0), fmt_num(0), fmt_num(0)});
            continue;
        }
        const AttackReport r = evaluate_attack(tm, batch.examples, base, cfg.percept);
        rep.add_row({batch.attack, batch.mode, std::to_string(r.n_examples), fmt_num(r.asr),
                     fmt_num(r.mr), fmt_num(r.adv_conf), fmt_num(r.perturb),
                     fmt_num(r.percept),
                     fmt_num(time_value(cfg, r.mean_time_s, r.mean_evals))});
    }
    write_table(rep, out_path(opt, "reports").string());
    echo_table(rep, opt);
}

// --- defend ------------------------------------------------------------

namespace {

struct SourceBatch {
    std::string name;
    std::vector<Tensor> inputs;
    std::vector<int> truths;  // -1 marks out-of-distribution
};

std::vector<SourceBatch> defense_sources(const ExperimentConfig& cfg, const RunOptions& opt,
                                         const Dataset& test, const Dataset& ood) {
    std::vector<SourceBatch> out;
    out.push_back({"benign", test.images, test.labels});
    for (const std::string& tag : attack_tags(cfg.attacks)) {
        const fs::path p = out_path(opt, "attacks/" + tag + ".jsonl");
        if (!fs::exists(p))
            fail_data("missing adversarial batch '" + p.string() + "'; run attack first");
        const AdvBatch b = load_adv_batch(p.string());
        SourceBatch s{tag, {}, {}};
        for (const AdversarialExample& e : b.examples) {
            if (!e.success) continue;
            s.inputs.push_back(e.perturbed);
            s.truths.push_back(e.true_label);
        }
        out.push_back(std::move(s));
    }
    out.push_back({"ood", ood.images, std::vector<int>(ood.images.size(), -1)});
    return out;
}

struct RowSpec {
    std::string name;
    std::string layer;  // none | input | output | combined
    RankedPool pool;
    TeamPolicy policy = TeamPolicy::Best;
    size_t top_m = 1;
    std::vector<DenoiserSpec> denoisers;
    bool include_target = true;
};

struct CellStats {
    size_t n = 0;
    DefenseRates rates;
    double flag_rate = 0.0;
    double acc_nf = 0.0;  // accuracy among non-flagged verdicts
};

CellStats run_cell(const ExperimentConfig& cfg, const RowSpec& row, const SourceBatch& src,
                   const std::map<std::string, const MicroModel*>& models, uint64_t seed,
                   double confidence_level, std::vector<Verdict>* verdicts_out) {
    CellStats cell;
    cell.n = src.inputs.size();
    if (src.inputs.empty()) {
        if (verdicts_out) verdicts_out->clear();
        return cell;
    }
    DefenseConfig dc;
    dc.denoisers = row.denoisers;
    dc.rule = cfg.defense.rule;
    dc.confidence_level = confidence_level;
    dc.include_target_vote = row.include_target;
    dc.seed = seed;
    std::vector<Verdict> vs =
        defend_batch(src.inputs, models, row.pool, row.policy, row.top_m,
                     ExperimentConfig::target_id(), dc, cfg.workers);
    cell.rates = defense_rates(vs, src.truths);
    size_t flagged = 0, kept = 0, kept_right = 0;
    for (size_t i = 0; i < vs.size(); ++i) {
        if (vs[i].outcome == VerdictOutcome::Flagged) {
            ++flagged;
        } else {
            ++kept;
            if (src.truths[i] >= 0 && vs[i].label == src.truths[i]) ++kept_right;
        }
    }
    cell.flag_rate = double(flagged) / double(vs.size());
    cell.acc_nf = kept ? double(kept_right) / double(kept) : 0.0;
    if (verdicts_out) *verdicts_out = std::move(vs);
    return cell;
}

}  // namespace

void cmd_defend(const ExperimentConfig& cfg, const RunOptions& opt) {
    const Pool pool = load_pool(cfg, opt);
    const auto models = pool.map();
    const Dataset test = need_dataset(opt, "test");
    const Dataset ood = need_dataset(opt, "ood");
    const RankedPool serving = load_ensembles(cfg, opt);
    ensure_dir(out_path(opt, "reports"));
    ensure_dir(out_path(opt, "verdicts"));

    const std::vector<SourceBatch> sources = defense_sources(cfg, opt, test, ood);

    std::vector<RowSpec> rows;
    const std::string tm_id = ExperimentConfig::target_id();
    rows.push_back({"tm-no-defense", "none", single_pool({tm_id}), TeamPolicy::Best, 1, {},
                    true});
    for (const DenoiserSpec& d : cfg.defense.denoisers)
        rows.push_back({d.canonical_name(), "input", single_pool({tm_id}), TeamPolicy::Best,
                        1, {d}, true});
    for (const std::string& vm : cfg.verifier_ids())
        rows.push_back({vm, "output", single_pool({tm_id, vm}), TeamPolicy::Best, 1, {},
                        true});
    const size_t all_teams = serving.teams.size();
    const size_t top_m = std::min(cfg.defense.top_m, all_teams);
    const bool itv = cfg.defense.include_target_vote;
    rows.push_back({"rand", "output", serving, TeamPolicy::RandomTopM, all_teams, {}, itv});
    rows.push_back({"rand", "combined", serving, TeamPolicy::RandomTopM, all_teams,
                    cfg.defense.denoisers, itv});
    rows.push_back({"kappa-rand", "output", serving, TeamPolicy::RandomTopM, top_m, {}, itv});
    rows.push_back({"kappa-rand", "combined", serving, TeamPolicy::RandomTopM, top_m,
                    cfg.defense.denoisers, itv});
    rows.push_back({"best-kappa", "output", serving, TeamPolicy::Best, 1, {}, itv});
    rows.push_back({"best-kappa", "combined", serving, TeamPolicy::Best, 1,
                    cfg.defense.denoisers, itv});

    Table longrep{"defense_report", {"defense", "layer", "source", "n", "DSR", "PSR", "TSR",
                                     "FlagRate", "AccNF"}};
    std::vector<std::vector<CellStats>> grid(rows.size(),
                                             std::vector<CellStats>(sources.size()));
    for (size_t ri = 0; ri < rows.size(); ++ri) {
        const RowSpec& row = rows[ri];
        for (size_t si = 0; si < sources.size(); ++si) {
            const SourceBatch& src = sources[si];
            const bool keep_verdicts = row.name == "best-kappa" && row.layer == "combined";
            std::vector<Verdict> vs;
            const CellStats cell =
                run_cell(cfg, row, src, models, stream_seed(cfg, {kStreamDefense, ri, si}),
                         cfg.defense.confidence_level, keep_verdicts ? &vs : nullptr);
            grid[ri][si] = cell;
            longrep.add_row({row.name, row.layer, src.name, std::to_string(cell.n),
                             fmt_num(cell.rates.dsr), fmt_num(cell.rates.psr),
                             fmt_num(cell.rates.tsr), fmt_num(cell.flag_rate),
                             fmt_num(cell.acc_nf)});
            if (keep_verdicts && !vs.empty())
                save_verdicts(vs, src.name,
                              out_path(opt, "verdicts/" + src.name + ".jsonl").string());
        }
    }

    // Wide view: benign accuracy, per-attack DSR, OOD DSR and the
    // average DSR over attack sources that produced examples.
    std::vector<std::string> cols{"defense", "layer", "benign"};
    for (size_t si = 1; si + 1 < sources.size(); ++si) cols.push_back(sources[si].name);
    cols.push_back("ood");
    cols.push_back("average");
    Table sum{"defense_summary", cols};
    for (size_t ri = 0; ri < rows.size(); ++ri) {
        std::vector<std::string> cells{rows[ri].name, rows[ri].layer,
                                       fmt_num(grid[ri][0].acc_nf)};
        double acc = 0.0;
        size_t cnt = 0;
        for (size_t si = 1; si + 1 < sources.size(); ++si) {
            cells.push_back(fmt_num(grid[ri][si].rates.dsr));
            if (grid[ri][si].n > 0) {
                acc += grid[ri][si].rates.dsr;
                ++cnt;
            }
        }
        cells.push_back(fmt_num(grid[ri][sources.size() - 1].rates.dsr));
        cells.push_back(fmt_num(cnt ? acc / double(cnt) : 0.0));
        sum.add_row(std::move(cells));
    }

    write_table(longrep, out_path(opt, "reports").string());
    write_table(sum, out_path(opt, "reports").string());
    echo_table(sum, opt);
}

// --- ood ---------------------------------------------------------------

void cmd_ood(const ExperimentConfig& cfg, const RunOptions& opt) {
    const Pool pool = load_pool(cfg, opt);
    const auto models = pool.map();
    const Dataset test = need_dataset(opt, "test");
    const Dataset ood = need_dataset(opt, "ood");
    if (ood.kind != DatasetKind::Ood || ood.images.empty())
        fail_data("detection needs a non-empty out-of-distribution dataset; "
                  "with in-distribution inputs only, AUROC is undefined");
    ensure_dir(out_path(opt, "reports"));

    // Detection runs on the deployed defense: the best-ranked serving
    // team voting across every verification channel.
    const RankedPool serving = load_ensembles(cfg, opt);

    DefenseConfig dc;
    dc.denoisers = cfg.defense.denoisers;
    dc.rule = cfg.defense.rule;
    dc.confidence_level = cfg.defense.confidence_level;
    dc.include_target_vote = cfg.defense.include_target_vote;
    const std::string tm_id = ExperimentConfig::target_id();

    dc.seed = stream_seed(cfg, {kStreamOod, 0});
    const std::vector<Verdict> vb = defend_batch(test.images, models, serving,
                                                 TeamPolicy::Best, 1, tm_id, dc, cfg.workers);
    dc.seed = stream_seed(cfg, {kStreamOod, 1});
    const std::vector<Verdict> vo = defend_batch(ood.images, models, serving,
                                                 TeamPolicy::Best, 1, tm_id, dc, cfg.workers);

    std::vector<double> negatives, positives;
    size_t flag_b = 0, flag_o = 0;
    for (const Verdict& v : vb) {
        negatives.push_back(v.detection_score);
        flag_b += v.outcome == VerdictOutcome::Flagged;
    }
    for (const Verdict& v : vo) {
        positives.push_back(v.detection_score);
        flag_o += v.outcome == VerdictOutcome::Flagged;
    }
    const double tpr = vo.empty() ? 0.0 : double(flag_o) / double(vo.size());
    const double fpr = vb.empty() ? 0.0 : double(flag_b) / double(vb.size());
    const double auc = auroc(negatives, positives);
    const double f95 = fpr_at_tpr(negatives, positives, 0.95);
    const double derr = detection_error(tpr, fpr, 0.5);
    const DefenseRates rates = defense_rates(vo, std::vector<int>(vo.size(), -1));

    Table rep{"ood_report", {"source", "n_ood", "n_benign", "T", "DSR", "TPR", "FPR",
                             "DError", "AUROC", "FPR@0.95TPR"}};
    rep.add_row({"ood", std::to_string(vo.size()), std::to_string(vb.size()),
                 fmt_num(dc.confidence_level), fmt_num(rates.dsr), fmt_num(tpr),
                 fmt_num(fpr), fmt_num(derr), fmt_num(auc), fmt_num(f95)});

    const fs::path sp = out_path(opt, "reports/ood_scores.dat");
    std::ofstream scores(sp, std::ios::binary);
    if (!scores) fail_data("cannot open '" + sp.string() + "' for writing");
    scores << "# detection_score is_ood\n";
    for (double s : negatives) scores << fmt_num6(s) << " 0\n";
    for (double s : positives) scores << fmt_num6(s) << " 1\n";
    if (!scores) fail_data("failed writing '" + sp.string() + "'");

    write_table(rep, out_path(opt, "reports").string());
    echo_table(rep, opt);
}

// --- threat ------------------------------------------------------------

void cmd_threat(const ExperimentConfig& cfg, const RunOptions& opt) {
    const Pool pool = load_pool(cfg, opt);
    const auto models = pool.map();
    const Dataset test = need_dataset(opt, "test");
    const RankedPool serving = load_ensembles(cfg, opt);
    ensure_dir(out_path(opt, "reports"));

    const std::string tm_id = ExperimentConfig::target_id();
    const std::vector<std::string> vms = cfg.verifier_ids();
    const size_t g = cfg.threat.grey_exposed;
    if (g >= vms.size())
        fail_config("threat.grey_exposed must be smaller than the verifier count");

    // Fixed serving committee: the best-ranked team whose voters cannot
    // be majority-covered by a grey-box attacker — with grey_exposed
    // voters compromised, the remaining ones can still force at least a
    // tie, so a partially-informed adversary never controls the verdict
    // outright.
    const EnsembleTeam* fix_team = nullptr;
    for (const EnsembleTeam& t : serving.teams) {
        if (t.member_ids.size() - 1 >= g + 2) {
            fix_team = &t;
            break;
        }
    }
    if (!fix_team)
        fail_config("threat.grey_exposed leaves no ranked team with enough hidden verifiers");
    const RankedPool fix_pool = [&] {
        RankedPool p;
        p.teams.push_back(*fix_team);
        return p;
    }();

    // First g verifiers of a committee, in pool order.
    auto exposed_of = [&](const std::vector<std::string>& committee) {
        std::vector<std::string> ids{tm_id};
        for (const std::string& vm : vms) {
            if (ids.size() > g) break;
            if (std::find(committee.begin(), committee.end(), vm) != committee.end())
                ids.push_back(vm);
        }
        return ids;
    };

    struct Scenario {
        std::string name;
        std::vector<std::string> exposed;
        bool fixed;
    };
    std::vector<Scenario> scenarios;
    scenarios.push_back({"black", {tm_id}, true});
    scenarios.push_back({"grey-fix", exposed_of(fix_team->member_ids), true});
    scenarios.push_back({"grey-rand", exposed_of(vms), false});
    scenarios.push_back({"white-fix", pool.ids, true});
    scenarios.push_back({"white-rand", pool.ids, false});

    const std::vector<size_t> sel = first_correct(pool.models[0], test, cfg.threat.inputs);
    if (sel.empty()) fail_data("no correctly classified test inputs to attack");
    const double t_level = cfg.threat.confidence_level < 0
                               ? cfg.defense.confidence_level
                               : cfg.threat.confidence_level;

    Table rep{"threat_report", {"scenario", "exposed", "serving", "n", "ASR", "DSR", "PSR",
                                "TSR", "Perturb", "Percept", "Time"}};
    for (size_t si = 0; si < scenarios.size(); ++si) {
        const Scenario& sc = scenarios[si];
        std::vector<const MicroModel*> exposed;
        for (const std::string& id : sc.exposed) exposed.push_back(&pool.by_id(id));

        std::vector<AdversarialExample> ex(sel.size());
        parallel_for(sel.size(), cfg.workers, [&](size_t i) {
            AttackConfig a = cfg.threat.attack;
            a.seed = stream_seed(cfg, {kStreamThreat, si, 0, i});
            ex[i] = ensemble_attack(exposed, test.images[sel[i]], test.labels[sel[i]], a);
            ex[i].id = i;
            ex[i].source_index = sel[i];
        });

        SourceBatch adv{sc.name, {}, {}};
        double perturb = 0.0, percept = 0.0, time_sum = 0.0, eval_sum = 0.0;
        for (const AdversarialExample& e : ex) {
            time_sum += e.gen_time_s;
            eval_sum += double(e.gen_evals);
            if (!e.success) continue;
            double sq = 0.0;
            for (size_t k = 0; k < e.original.size(); ++k) {
                const double d = e.perturbed.data[k] - e.original.data[k];
                sq += d * d;
            }
            perturb += std::sqrt(sq / double(e.original.size()));
            percept += percept_distance(e.original, e.perturbed, cfg.percept);
            adv.inputs.push_back(e.perturbed);
            adv.truths.push_back(e.true_label);
        }
        const size_t n_succ = adv.inputs.size();
        const double asr = double(n_succ) / double(ex.size());

        RowSpec row;
        row.name = sc.name;
        row.pool = sc.fixed ? fix_pool : serving;
        row.policy = sc.fixed ? TeamPolicy::Best : TeamPolicy::RandomTopM;
        row.top_m = sc.fixed ? 1 : serving.teams.size();
        // Output-only verification, and the attacked model's raw
        // prediction carries no vote: the verdict depends entirely on
        // which verifiers the attack managed to cover, which is the
        // quantity the exposure scenarios vary.
        row.include_target = false;
        const CellStats cell = run_cell(cfg, row, adv, models,
                                        stream_seed(cfg, {kStreamThreat, si, 1}), t_level,
                                        nullptr);

        rep.add_row({sc.name, join_ids(sc.exposed, "+"),
                     sc.fixed ? "fixed:" + join_ids(fix_team->member_ids, "+") : "random",
                     std::to_string(n_succ), fmt_num(asr), fmt_num(cell.rates.dsr),
                     fmt_num(cell.rates.psr), fmt_num(cell.rates.tsr),
                     fmt_num(n_succ ? perturb / double(n_succ) : 0.0),
                     fmt_num(n_succ ? percept / double(n_succ) : 0.0),
                     fmt_num(time_value(cfg, time_sum / double(ex.size()),
                                        eval_sum / double(ex.size())))});
    }
    write_table(rep, out_path(opt, "reports").string());
    echo_table(rep, opt);
}

// --- report ------------------------------------------------------------

void cmd_report(const ExperimentConfig& cfg, const RunOptions& opt) {
    (void)cfg;
    const std::vector<std::string> names = {
        "pool_report", "ensemble_report", "attack_report", "defense_report",
        "defense_summary", "ood_report", "threat_report"};
    std::vector<Table> tables;
    for (const std::string& name : names) {
        const fs::path p = out_path(opt, "reports/" + name + ".json");
        if (!fs::exists(p)) continue;
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            const json doc = json::parse(ss.str());
            Table t;
            t.name = doc.at("name").get<std::string>();
            t.columns = doc.at("columns").get<std::vector<std::string>>();
            for (const json& rj : doc.at("rows")) {
                std::vector<std::string> row;
                for (const std::string& c : t.columns)
                    row.push_back(rj.at(c).get<std::string>());
                t.rows.push_back(std::move(row));
            }
            tables.push_back(std::move(t));
        } catch (const json::exception& e) {
            fail_data("cannot parse report '" + p.string() + "': " + std::string(e.what()));
        }
    }
    if (tables.empty())
        fail_data("no report files under '" + out_path(opt, "reports").string() +
                  "'; run the pipeline commands first");

    json doc;
    doc["version"] = 1;
    json tj = json::array();
    std::string csv, text;
    for (const Table& t : tables) {
        tj.push_back(json::parse(table_to_json(t)));
        csv += "# " + t.name + "\n" + table_to_csv(t) + "\n";
        text += table_to_text(t) + "\n";
    }
    doc["tables"] = std::move(tj);

    auto put = [&](const std::string& rel, const std::string& content) {
        const fs::path p = out_path(opt, rel);
        std::ofstream out(p, std::ios::binary);
        if (!out) fail_data("cannot open '" + p.string() + "' for writing");
        out << content;
        if (!out) fail_data("failed writing '" + p.string() + "'");
    };
    put("reports/summary.json", doc.dump(2) + "\n");
    put("reports/summary.csv", csv);
    put("reports/summary.txt", text);

    if (!opt.quiet) {
        if (opt.format == "csv")
            std::cout << csv;
        else if (opt.format == "json")
            std::cout << doc.dump(2) << "\n";
        else
            std::cout << text;
    }
}

// --- dispatcher --------------------------------------------------------

void run_command(const RunOptions& opt) {
    if (opt.out_dir.empty()) fail_config("an output directory is required (--out)");
    if (opt.format != "text" && opt.format != "csv" && opt.format != "json")
        fail_config("unknown output format '" + opt.format + "'");

    ExperimentConfig cfg = opt.config_path.empty() ? parse_config("{\"version\": 1}")
                                                   : load_config(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.workers) cfg.workers = *opt.workers;
    if (cfg.workers < 1) fail_config("workers must be at least 1");

    using Cmd = void (*)(const ExperimentConfig&, const RunOptions&);
    static const std::map<std::string, Cmd> dispatch = {
        {"gen-data", cmd_gen_data},       {"train-pool", cmd_train_pool},
        {"rank-ensembles", cmd_rank_ensembles}, {"attack", cmd_attack},
        {"defend", cmd_defend},           {"ood", cmd_ood},
        {"threat", cmd_threat},           {"report", cmd_report}};
    const auto it = dispatch.find(opt.command);
    if (it == dispatch.end()) fail_config("unknown command '" + opt.command + "'");
    ensure_dir(fs::path(opt.out_dir));
    it->second(cfg, opt);
}

}  // namespace xens
