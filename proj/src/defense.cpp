#include "xens/defense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "xens/error.hpp"
#include "xens/parallel.hpp"
#include "xens/rng.hpp"

namespace xens {

using json = nlohmann::ordered_json;

std::string consensus_rule_name(ConsensusRule r) {
    switch (r) {
        case ConsensusRule::Majority: return "majority";
        case ConsensusRule::Plurality: return "plurality";
        case ConsensusRule::Average: return "average";
        case ConsensusRule::WeightedAverage: return "weighted-average";
    }
    fail_invalid("bad consensus rule");
}

ConsensusRule consensus_rule_from_name(const std::string& s) {
    if (s == "majority") return ConsensusRule::Majority;
    if (s == "plurality") return ConsensusRule::Plurality;
    if (s == "average") return ConsensusRule::Average;
    if (s == "weighted-average") return ConsensusRule::WeightedAverage;
    fail_config("unknown consensus rule '" + s + "'");
}

void DefenseConfig::validate() const {
    if (confidence_level < 0.0 || confidence_level > 1.0)
        fail_config("confidence_level must be in [0,1]");
}

std::string verdict_outcome_name(VerdictOutcome o) {
    switch (o) {
        case VerdictOutcome::Verified: return "Verified";
        case VerdictOutcome::Repaired: return "Repaired";
        case VerdictOutcome::Flagged: return "Flagged";
    }
    fail_invalid("bad verdict outcome");
}

double l1_distance(const PredictionVector& a, const PredictionVector& b) {
    if (a.probs.size() != b.probs.size()) fail_dim("l1_distance: class count mismatch");
    if (a.probs.empty()) fail_invalid("l1_distance: empty vectors");
    double s = 0.0;
    for (size_t i = 0; i < a.probs.size(); ++i) s += std::fabs(a.probs[i] - b.probs[i]);
    return s;
}

ConsensusResult consensus(const std::vector<PredictionVector>& vectors, ConsensusRule rule) {
    if (vectors.empty()) fail_invalid("consensus: no prediction vectors");
    const size_t K = vectors[0].probs.size();
    for (const auto& v : vectors)
        if (v.probs.size() != K) fail_dim("consensus: class count mismatch");

    std::vector<size_t> votes(K, 0);
    for (const auto& v : vectors) votes[size_t(v.label)] += 1;
    const double total = double(vectors.size());

    ConsensusResult res;
    if (rule == ConsensusRule::Majority || rule == ConsensusRule::Plurality) {
        size_t top = 0;
        for (size_t k = 1; k < K; ++k)
            if (votes[k] > votes[top]) top = k;
        const size_t top_count = votes[top];
        res.share = double(top_count) / total;
        res.label = int(top);
        if (rule == ConsensusRule::Majority) {
            res.has_winner = 2 * top_count > vectors.size();
        } else {
            size_t with_top = 0;
            for (size_t k = 0; k < K; ++k)
                if (votes[k] == top_count) ++with_top;
            res.has_winner = with_top == 1;
        }
        if (!res.has_winner) res.label = -1;
        return res;
    }

    // average rules: argmax of the (weighted) mean vector; the share
    // reported is still that label's share of the argmax votes
    std::vector<double> mean(K, 0.0);
    double wsum = 0.0;
    for (const auto& v : vectors) {
        const double w = rule == ConsensusRule::WeightedAverage ? v.confidence : 1.0;
        for (size_t k = 0; k < K; ++k) mean[k] += w * v.probs[k];
        wsum += w;
    }
    if (wsum <= 0.0) wsum = 1.0;
    for (double& v : mean) v /= wsum;
    res.has_winner = true;
    res.label = argmax_lowest(mean);
    res.share = double(votes[size_t(res.label)]) / total;
    return res;
}

double detection_score(const std::vector<PredictionVector>& vectors) {
    if (vectors.size() < 2) fail_invalid("detection_score: need at least two vectors");
    double acc = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < vectors.size(); ++i) {
        for (size_t j = i + 1; j < vectors.size(); ++j) {
            acc += l1_distance(vectors[i], vectors[j]) / 2.0;
            ++pairs;
        }
    }
    return acc / double(pairs);
}

Verdict defend(const Tensor& x, const std::vector<TeamMember>& team,
               const std::string& target_id, const DefenseConfig& cfg) {
    cfg.validate();
    if (team.empty()) fail_invalid("defend: empty team");
    const MicroModel* target = nullptr;
    for (const TeamMember& m : team) {
        if (!m.model) fail_invalid("defend: null model in team");
        if (m.model->num_classes() != team[0].model->num_classes())
            fail_dim("defend: team models disagree on class count");
        if (m.id == target_id) target = m.model;
    }
    if (!target) fail_invalid("defend: team does not contain target model '" + target_id + "'");

    const std::vector<Tensor> variants = denoise_ensemble(x, cfg.denoisers);

    Verdict v;
    PredictionVector raw_target_pred;
    for (size_t vi = 0; vi < variants.size(); ++vi) {
        const std::string dname = vi == 0 ? "raw" : cfg.denoisers[vi - 1].canonical_name();
        for (const TeamMember& m : team) {
            PredictionVector pred = m.model->forward(variants[vi]);
            if (vi == 0 && m.id == target_id) raw_target_pred = pred;
            if (vi == 0 && m.id == target_id && !cfg.include_target_vote) continue;
            v.votes.push_back({dname, m.id, std::move(pred)});
        }
    }
    if (v.votes.empty()) fail_invalid("defend: no votes collected");

    std::vector<PredictionVector> preds;
    preds.reserve(v.votes.size());
    for (const Vote& vote : v.votes) preds.push_back(vote.pred);

    const ConsensusResult cons = consensus(preds, cfg.rule);
    v.detection_score = preds.size() >= 2 ? detection_score(preds) : 0.0;
    v.agreement = cons.share;

    if (cons.has_winner && cons.share >= cfg.confidence_level) {
        v.label = cons.label;
        v.outcome = cons.label == raw_target_pred.label ? VerdictOutcome::Verified
                                                        : VerdictOutcome::Repaired;
    } else {
        v.label = -1;
        v.outcome = VerdictOutcome::Flagged;
    }
    return v;
}

std::vector<Verdict> defend_batch(const std::vector<Tensor>& inputs,
                                  const std::map<std::string, const MicroModel*>& models,
                                  const RankedPool& ranked, TeamPolicy policy, size_t top_m,
                                  const std::string& target_id, const DefenseConfig& cfg,
                                  int workers) {
    if (ranked.teams.empty()) fail_invalid("defend_batch: empty ranked team pool");
    auto build_team = [&](const EnsembleTeam& et) {
        std::vector<TeamMember> team;
        for (const std::string& id : et.member_ids) {
            const auto it = models.find(id);
            if (it == models.end())
                fail_invalid("defend_batch: model '" + id + "' not in pool");
            team.push_back({id, it->second});
        }
        return team;
    };

    std::vector<Verdict> out(inputs.size());
    parallel_for(inputs.size(), workers, [&](size_t i) {
        const uint64_t qseed = Rng(cfg.seed).child(i).seed();
        const EnsembleTeam& et =
            policy == TeamPolicy::Best
                ? select_team(ranked, TeamPolicy::Best, 1, 0)
                : select_team(ranked, TeamPolicy::RandomTopM, top_m, qseed);
        out[i] = defend(inputs[i], build_team(et), target_id, cfg);
    });
    return out;
}

void save_verdicts(const std::vector<Verdict>& verdicts, const std::string& source,
                   const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_data("cannot open '" + path + "' for writing");
    json meta;
    meta["version"] = 1;
    meta["source"] = source;
    meta["count"] = verdicts.size();
    out << meta.dump() << "\n";
    for (size_t i = 0; i < verdicts.size(); ++i) {
        const Verdict& v = verdicts[i];
        json line;
        line["id"] = i;
        line["outcome"] = verdict_outcome_name(v.outcome);
        if (v.label >= 0)
            line["label"] = v.label;
        else
            line["label"] = nullptr;
        line["agreement"] = v.agreement;
        line["detection_score"] = v.detection_score;
        out << line.dump() << "\n";
    }
    if (!out) fail_data("failed writing '" + path + "'");
}

std::vector<Verdict> load_verdicts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_data("cannot open verdict file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail_data("verdict file '" + path + "' is empty");
    size_t count = 0;
    try {
        const json meta = json::parse(line);
        if (meta.at("version").get<int>() != 1)
            fail_data("unsupported verdict file version in '" + path + "'");
        count = meta.at("count").get<size_t>();
    } catch (const json::exception& e) {
        fail_data("verdict metadata error in '" + path + "': " + e.what());
    }
    std::vector<Verdict> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            Verdict v;
            const std::string outcome = j.at("outcome").get<std::string>();
            if (outcome == "Verified")
                v.outcome = VerdictOutcome::Verified;
            else if (outcome == "Repaired")
                v.outcome = VerdictOutcome::Repaired;
            else if (outcome == "Flagged")
                v.outcome = VerdictOutcome::Flagged;
            else
                fail_data("unknown verdict outcome '" + outcome + "'");
            v.label = j.at("label").is_null() ? -1 : j.at("label").get<int>();
            v.agreement = j.at("agreement").get<double>();
            v.detection_score = j.at("detection_score").get<double>();
            out.push_back(std::move(v));
        } catch (const json::exception& e) {
            fail_data("verdict line " + std::to_string(lineno) + " in '" + path +
                      "': " + e.what());
        }
    }
    if (out.size() != count)
        fail_data("verdict file '" + path + "' is truncated");
    return out;
}

}  // namespace xens
