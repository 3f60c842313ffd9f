#include "xens/diversity.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include "xens/error.hpp"
#include "xens/rng.hpp"

namespace xens {

AgreementCounts AgreementCounts::from_labels(const std::vector<int>& a,
                                             const std::vector<int>& b,
                                             size_t classes) {
    if (a.size() != b.size())
        fail_invalid("agreement counts need label vectors of equal length");
    if (a.empty()) fail_invalid("agreement counts need at least one input");
    if (classes < 1) fail_invalid("agreement counts need at least one class");
    AgreementCounts ac;
    ac.counts.assign(classes, std::vector<size_t>(classes, 0));
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] < 0 || size_t(a[i]) >= classes || b[i] < 0 || size_t(b[i]) >= classes)
            fail_invalid("agreement counts: label out of range");
        ac.counts[size_t(a[i])][size_t(b[i])] += 1;
    }
    return ac;
}

size_t AgreementCounts::total() const {
    size_t n = 0;
    for (const auto& row : counts)
        for (size_t v : row) n += v;
    return n;
}

double kappa_pair(const AgreementCounts& ac) {
    const size_t K = ac.counts.size();
    if (K == 0) fail_invalid("kappa_pair: empty count matrix");
    for (const auto& row : ac.counts)
        if (row.size() != K) fail_invalid("kappa_pair: count matrix must be square");
    const double N = double(ac.total());
    if (N == 0) fail_invalid("kappa_pair: zero observations");

    double p_obs = 0.0, p_chance = 0.0;
    for (size_t i = 0; i < K; ++i) {
        p_obs += double(ac.counts[i][i]);
        double row = 0.0, col = 0.0;
        for (size_t j = 0; j < K; ++j) {
            row += double(ac.counts[i][j]);
            col += double(ac.counts[j][i]);
        }
        p_chance += (row / N) * (col / N);
    }
    p_obs /= N;
    if (p_chance >= 1.0) return 1.0;  // both raters glued to one label
    return (p_obs - p_chance) / (1.0 - p_chance);
}

std::vector<std::vector<double>> kappa_matrix(
    const std::vector<std::vector<int>>& labels_per_model, size_t classes) {
    const size_t M = labels_per_model.size();
    if (M < 2) fail_invalid("kappa_matrix: need at least two models");
    for (const auto& v : labels_per_model)
        if (v.size() != labels_per_model[0].size())
            fail_invalid("kappa_matrix: label vectors differ in length");
    std::vector<std::vector<double>> mat(M, std::vector<double>(M, 1.0));
    for (size_t i = 0; i < M; ++i) {
        for (size_t j = i + 1; j < M; ++j) {
            const double k = kappa_pair(
                AgreementCounts::from_labels(labels_per_model[i], labels_per_model[j], classes));
            mat[i][j] = mat[j][i] = k;
        }
    }
    return mat;
}

namespace {

// Subsets in (size, lexicographic) order via bit masks over sorted ids.
std::vector<std::vector<std::string>> subsets_min2(const std::vector<std::string>& ids) {
    if (ids.size() < 2) fail_invalid("team enumeration needs a pool of at least 2");
    if (ids.size() > 20) fail_invalid("team enumeration pool too large");
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i] == sorted[i - 1]) fail_invalid("duplicate model id in pool");
    std::vector<std::vector<std::string>> out;
    const uint32_t full = uint32_t(1) << sorted.size();
    for (uint32_t mask = 0; mask < full; ++mask) {
        if (std::popcount(mask) < 2) continue;
        std::vector<std::string> team;
        for (size_t i = 0; i < sorted.size(); ++i)
            if (mask & (uint32_t(1) << i)) team.push_back(sorted[i]);
        out.push_back(std::move(team));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    return out;
}

}  // namespace

std::vector<std::vector<std::string>> enumerate_teams(
    const std::vector<std::string>& pool_ids) {
    return subsets_min2(pool_ids);
}

std::vector<std::vector<std::string>> enumerate_defense_teams(
    const std::vector<std::string>& verifier_ids, const std::string& target_id) {
    for (const auto& id : verifier_ids)
        if (id == target_id) fail_invalid("target model listed among verifiers");
    auto subsets = subsets_min2(verifier_ids);
    for (auto& team : subsets) {
        team.push_back(target_id);
        std::sort(team.begin(), team.end());
    }
    return subsets;
}

RankedPool rank_teams(const std::vector<std::vector<std::string>>& teams,
                      const std::vector<std::string>& model_ids,
                      const std::vector<std::vector<double>>& kappa,
                      double kappa_threshold) {
    if (model_ids.size() != kappa.size())
        fail_invalid("rank_teams: kappa matrix does not match model id list");
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < model_ids.size(); ++i) index[model_ids[i]] = i;

    RankedPool pool;
    for (const auto& team : teams) {
        if (team.size() < 2) fail_invalid("rank_teams: team smaller than 2");
        EnsembleTeam et;
        et.member_ids = team;
        std::sort(et.member_ids.begin(), et.member_ids.end());
        double sum = 0.0;
        size_t pairs = 0;
        for (size_t i = 0; i < team.size(); ++i) {
            const auto it_i = index.find(et.member_ids[i]);
            if (it_i == index.end())
                fail_invalid("rank_teams: unknown model id '" + et.member_ids[i] + "'");
            for (size_t j = i + 1; j < team.size(); ++j) {
                const auto it_j = index.find(et.member_ids[j]);
                if (it_j == index.end())
                    fail_invalid("rank_teams: unknown model id '" + et.member_ids[j] + "'");
                sum += kappa[it_i->second][it_j->second];
                ++pairs;
            }
        }
        et.kappa_avg = sum / double(pairs);
        if (et.kappa_avg > kappa_threshold) continue;
        pool.teams.push_back(std::move(et));
    }
    std::stable_sort(pool.teams.begin(), pool.teams.end(),
                     [](const EnsembleTeam& a, const EnsembleTeam& b) {
                         if (a.kappa_avg != b.kappa_avg) return a.kappa_avg < b.kappa_avg;
                         if (a.member_ids.size() != b.member_ids.size())
                             return a.member_ids.size() < b.member_ids.size();
                         return a.member_ids < b.member_ids;
                     });
    return pool;
}

const EnsembleTeam& select_team(const RankedPool& pool, TeamPolicy policy, size_t m,
                                uint64_t seed) {
    if (pool.teams.empty()) fail_invalid("select_team: ranked pool is empty");
    if (policy == TeamPolicy::Best) return pool.teams.front();
    if (m == 0) fail_invalid("select_team: m must be positive");
    const size_t top = std::min(m, pool.teams.size());
    Rng rng(seed);
    return pool.teams[size_t(rng.below(top))];
}

void save_kappa_csv(const std::vector<std::string>& model_ids,
                    const std::vector<std::vector<double>>& kappa,
                    const std::string& path) {
    if (model_ids.size() != kappa.size())
        fail_invalid("save_kappa_csv: id list does not match matrix");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_data("cannot open '" + path + "' for writing");
    out << "model";
    for (const auto& id : model_ids) out << "," << id;
    out << "\n";
    char buf[64];
    for (size_t i = 0; i < kappa.size(); ++i) {
        out << model_ids[i];
        for (size_t j = 0; j < kappa[i].size(); ++j) {
            snprintf(buf, sizeof buf, "%.6f", kappa[i][j]);
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) fail_data("failed writing '" + path + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

KappaTable load_kappa_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_data("cannot open kappa matrix '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail_data("kappa matrix '" + path + "' is empty");
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "model")
        fail_data("kappa matrix '" + path + "': bad header");
    KappaTable t;
    t.model_ids.assign(header.begin() + 1, header.end());
    const size_t n = t.model_ids.size();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != n + 1)
            fail_data("kappa matrix '" + path + "': row width mismatch");
        const size_t r = t.kappa.size();
        if (r >= n || cells[0] != t.model_ids[r])
            fail_data("kappa matrix '" + path + "': row order does not match header");
        std::vector<double> row(n);
        for (size_t j = 0; j < n; ++j) {
            try {
                row[j] = std::stod(cells[j + 1]);
            } catch (const std::exception&) {
                fail_data("kappa matrix '" + path + "': bad number '" + cells[j + 1] + "'");
            }
        }
        t.kappa.push_back(std::move(row));
    }
    if (t.kappa.size() != n) fail_data("kappa matrix '" + path + "': missing rows");
    return t;
}

}  // namespace xens
