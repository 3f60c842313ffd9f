#include "xens/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xens/error.hpp"

namespace xens {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
    if (!obj.is_object()) fail_config(where + " must be a JSON object");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            fail_config("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        fail_config(std::string("bad value for '") + key + "'");
    }
}

AttackConfig parse_attack(const json& j, uint64_t default_seed) {
    check_keys(j,
               {"kind", "target_mode", "epsilon", "step", "max_iters", "restarts",
                "random_start", "confidence", "check_every", "cw_c", "max_distortion"},
               "attack entry");
    if (!j.contains("kind")) fail_config("attack entry needs a 'kind'");
    AttackConfig a;
    a.kind = attack_kind_from_name(j.at("kind").get<std::string>());
    // targeted-only attacks default to the runner-up class target
    if (a.kind == AttackKind::Cw2 || a.kind == AttackKind::Jsma)
        a.target_mode = TargetMode::Most;
    if (j.contains("target_mode"))
        a.target_mode = target_mode_from_name(j.at("target_mode").get<std::string>());
    switch (a.kind) {
        case AttackKind::Fgsm: a.epsilon = 0.06; break;
        case AttackKind::Bim: a.epsilon = 0.06; a.step = 0.01; a.max_iters = 10; break;
        case AttackKind::Pgd:
            a.epsilon = 0.06; a.step = 0.01; a.max_iters = 20; a.restarts = 3;
            break;
        case AttackKind::Cw2:
            a.step = 0.01; a.max_iters = 1000; a.check_every = 100;
            break;
        case AttackKind::Jsma: a.max_distortion = 0.10; break;
    }
    read(j, "epsilon", a.epsilon);
    read(j, "step", a.step);
    read(j, "max_iters", a.max_iters);
    read(j, "restarts", a.restarts);
    read(j, "random_start", a.random_start);
    read(j, "confidence", a.confidence);
    read(j, "check_every", a.check_every);
    read(j, "cw_c", a.cw_c);
    read(j, "max_distortion", a.max_distortion);
    a.seed = default_seed;
    a.validate();
    return a;
}

}  // namespace

std::vector<std::string> ExperimentConfig::verifier_ids() const {
    std::vector<std::string> ids;
    for (size_t i = 0; i < pool.verifier_hidden.size(); ++i)
        ids.push_back("vm" + std::to_string(i + 1));
    return ids;
}

std::vector<AttackConfig> default_attacks() {
    auto mk = [](const char* kind, const char* mode) {
        json j;
        j["kind"] = kind;
        j["target_mode"] = mode;
        return parse_attack(j, 0);
    };
    return {mk("fgsm", "untargeted"), mk("bim", "untargeted"), mk("pgd", "untargeted"),
            mk("cw2", "most"),        mk("cw2", "least-likely"), mk("jsma", "most")};
}

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        fail_config(std::string("config parse error: ") + e.what());
    }
    check_keys(doc,
               {"version", "seed", "workers", "timing", "dataset", "pool", "attack_inputs",
                "attacks", "ensembles", "defense", "threat", "percept_variant"},
               "config root");
    if (!doc.contains("version")) fail_config("config is missing 'version'");
    if (!doc.at("version").is_number_integer() || doc.at("version").get<int>() != 1)
        fail_config("unsupported config version " + doc.at("version").dump() +
                    " (expected 1)");

    ExperimentConfig cfg;
    read(doc, "seed", cfg.seed);
    read(doc, "workers", cfg.workers);
    if (cfg.workers < 1) fail_config("workers must be at least 1");
    if (doc.contains("timing")) {
        const std::string t = doc.at("timing").get<std::string>();
        if (t == "work")
            cfg.timing = TimingMode::Work;
        else if (t == "wall")
            cfg.timing = TimingMode::Wall;
        else
            fail_config("timing must be 'work' or 'wall'");
    }
    if (doc.contains("percept_variant")) {
        const std::string p = doc.at("percept_variant").get<std::string>();
        if (p == "standard")
            cfg.percept = PerceptVariant::Standard;
        else if (p == "literal")
            cfg.percept = PerceptVariant::Literal;
        else
            fail_config("percept_variant must be 'standard' or 'literal'");
    }

    if (doc.contains("dataset")) {
        const json& d = doc.at("dataset");
        check_keys(d,
                   {"classes", "side", "per_class_train", "per_class_test", "noise_sigma",
                    "ood_count"},
                   "dataset");
        read(d, "classes", cfg.dataset.classes);
        read(d, "side", cfg.dataset.side);
        read(d, "per_class_train", cfg.dataset.per_class_train);
        read(d, "per_class_test", cfg.dataset.per_class_test);
        read(d, "noise_sigma", cfg.dataset.noise_sigma);
        read(d, "ood_count", cfg.dataset.ood_count);
    }

    if (doc.contains("pool")) {
        const json& p = doc.at("pool");
        check_keys(p,
                   {"target_hidden", "verifier_hidden", "epochs", "batch_size",
                    "learning_rate", "momentum", "train_fraction", "mask_fraction"},
                   "pool");
        read(p, "target_hidden", cfg.pool.target_hidden);
        read(p, "verifier_hidden", cfg.pool.verifier_hidden);
        read(p, "epochs", cfg.pool.epochs);
        read(p, "batch_size", cfg.pool.batch_size);
        read(p, "learning_rate", cfg.pool.learning_rate);
        read(p, "momentum", cfg.pool.momentum);
        read(p, "train_fraction", cfg.pool.train_fraction);
        read(p, "mask_fraction", cfg.pool.mask_fraction);
        if (cfg.pool.verifier_hidden.size() < 2)
            fail_config("pool needs at least 2 verifiers");
        if (cfg.pool.batch_size < 1) fail_config("pool batch_size must be positive");
        if (!(cfg.pool.train_fraction > 0.0 && cfg.pool.train_fraction <= 1.0))
            fail_config("pool train_fraction must be in (0,1]");
        if (!(cfg.pool.mask_fraction >= 0.0 && cfg.pool.mask_fraction < 1.0))
            fail_config("pool mask_fraction must be in [0,1)");
    }

    read(doc, "attack_inputs", cfg.attack_inputs);

    if (doc.contains("attacks")) {
        if (!doc.at("attacks").is_array()) fail_config("'attacks' must be an array");
        for (const json& a : doc.at("attacks")) cfg.attacks.push_back(parse_attack(a, 0));
        if (cfg.attacks.empty()) fail_config("'attacks' must not be empty");
    } else {
        cfg.attacks = default_attacks();
    }

    if (doc.contains("ensembles")) {
        const json& e = doc.at("ensembles");
        check_keys(e,
                   {"kappa_eval", "kappa_attack_epsilon", "kappa_inputs", "kappa_threshold",
                    "team_size"},
                   "ensembles");
        read(e, "kappa_eval", cfg.ensembles.kappa_eval);
        read(e, "kappa_attack_epsilon", cfg.ensembles.kappa_attack_epsilon);
        read(e, "kappa_inputs", cfg.ensembles.kappa_inputs);
        read(e, "kappa_threshold", cfg.ensembles.kappa_threshold);
        read(e, "team_size", cfg.ensembles.team_size);
        if (cfg.ensembles.kappa_eval != "negative" && cfg.ensembles.kappa_eval != "benign")
            fail_config("ensembles.kappa_eval must be 'negative' or 'benign'");
        if (cfg.ensembles.kappa_inputs < 1)
            fail_config("ensembles.kappa_inputs must be positive");
    }

    cfg.defense.denoisers = {parse_denoiser("quan-1-bit"),
                             parse_denoiser("rotation_-24"),
                             parse_denoiser("rotation_-30"),
                             parse_denoiser("rotation_30")};
    if (doc.contains("defense")) {
        const json& d = doc.at("defense");
        check_keys(d,
                   {"denoisers", "consensus", "confidence_level", "include_target_vote",
                    "top_m"},
                   "defense");
        if (d.contains("denoisers")) {
            cfg.defense.denoisers.clear();
            for (const json& n : d.at("denoisers"))
                cfg.defense.denoisers.push_back(parse_denoiser(n.get<std::string>()));
        }
        if (d.contains("consensus"))
            cfg.defense.rule = consensus_rule_from_name(d.at("consensus").get<std::string>());
        read(d, "confidence_level", cfg.defense.confidence_level);
        read(d, "include_target_vote", cfg.defense.include_target_vote);
        read(d, "top_m", cfg.defense.top_m);
        if (cfg.defense.confidence_level < 0 || cfg.defense.confidence_level > 1)
            fail_config("defense.confidence_level must be in [0,1]");
        if (cfg.defense.top_m < 1) fail_config("defense.top_m must be positive");
    }

    {
        json tj = doc.contains("threat") ? doc.at("threat") : json::object();
        check_keys(tj, {"attack", "inputs", "grey_exposed", "confidence_level"}, "threat");
        if (tj.contains("attack")) {
            cfg.threat.attack = parse_attack(tj.at("attack"), 0);
        } else {
            json a;
            a["kind"] = "cw2";
            a["target_mode"] = "most";
            cfg.threat.attack = parse_attack(a, 0);
        }
        read(tj, "inputs", cfg.threat.inputs);
        read(tj, "grey_exposed", cfg.threat.grey_exposed);
        read(tj, "confidence_level", cfg.threat.confidence_level);
        if (cfg.threat.grey_exposed < 1)
            fail_config("threat.grey_exposed must be positive");
        if (cfg.threat.confidence_level > 1)
            fail_config("threat.confidence_level must be in [0,1]");
    }

    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_config("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace xens
