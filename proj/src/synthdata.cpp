#include "xens/synthdata.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xens/error.hpp"
#include "xens/hexcodec.hpp"
#include "xens/rng.hpp"

namespace xens {

using json = nlohmann::ordered_json;

namespace {

constexpr double kBg = 0.38;
constexpr double kFg = 0.62;

double center(size_t side) { return (double(side) - 1.0) / 2.0; }

// Each template paints a shape family on a blank canvas. Classes map
// one-to-one onto in-distribution templates.
Tensor paint_in_dist(size_t id, size_t s) {
    Tensor img({s, s}, kBg);
    const double c = center(s);
    const long band = long(s) / 8;
    auto on = [&](size_t r, size_t col) { img.at(r, col) = kFg; };
    for (size_t r = 0; r < s; ++r) {
        for (size_t col = 0; col < s; ++col) {
            const long lr = long(r), lc = long(col);
            const double dr = double(r) - c, dc = double(col) - c;
            const double dist = std::sqrt(dr * dr + dc * dc);
            bool hit = false;
            switch (id) {
                case 0:  // horizontal-bar
                    hit = r >= s * 3 / 8 && r < s * 5 / 8;
                    break;
                case 1:  // vertical-bar
                    hit = col >= s * 3 / 8 && col < s * 5 / 8;
                    break;
                case 2:  // cross
                    hit = (r >= s * 3 / 8 && r < s * 5 / 8) ||
                          (col >= s * 3 / 8 && col < s * 5 / 8);
                    break;
                case 3:  // diagonal-stripe
                    hit = std::labs(lr - lc) <= band;
                    break;
                case 4:  // anti-diagonal-stripe
                    hit = std::labs(lr + lc - long(s) + 1) <= band;
                    break;
                case 5:  // disk
                    hit = dist <= 0.30 * double(s);
                    break;
                case 6:  // ring
                    hit = dist >= 0.28 * double(s) && dist <= 0.45 * double(s);
                    break;
                case 7:  // corner-blocks
                    hit = (r < s / 4 || r >= s - s / 4) && (col < s / 4 || col >= s - s / 4);
                    break;
                case 8:  // frame
                    hit = r < s / 8 + 1 || r >= s - s / 8 - 1 || col < s / 8 + 1 ||
                          col >= s - s / 8 - 1;
                    break;
                case 9:  // opposite-quadrants
                    hit = (r < s / 2) == (col < s / 2);
                    break;
                case 10:  // double-horizontal-bars
                    hit = (r >= s / 8 && r < s / 4) || (r >= s * 3 / 4 && r < s * 7 / 8);
                    break;
                case 11:  // double-vertical-bars
                    hit = (col >= s / 8 && col < s / 4) || (col >= s * 3 / 4 && col < s * 7 / 8);
                    break;
                default:
                    fail_invalid("unknown in-distribution template id");
            }
            if (hit) on(r, col);
        }
    }
    return img;
}

Tensor paint_ood(size_t id, size_t s, Rng& rng) {
    Tensor img({s, s}, kBg);
    for (size_t r = 0; r < s; ++r) {
        for (size_t col = 0; col < s; ++col) {
            const long lr = long(r), lc = long(col);
            bool hit = false;
            switch (id) {
                case 0: {  // zigzag
                    const long p = lc % 8;
                    const long z = long(s) / 4 + 2 * (p < 4 ? p : 8 - p);
                    hit = std::abs(lr - z) <= 1;
                    break;
                }
                case 1:  // ramp
                    img.at(r, col) = 0.1 + 0.8 * double(col) / double(s - 1);
                    continue;
                case 2:  // diagonal-grid
                    hit = ((lr + lc) % 4 == 0) || (((lr - lc) % 4 + 4) % 4 == 0);
                    break;
                case 3:  // uniform-noise
                    img.at(r, col) = rng.uniform01();
                    continue;
                case 4: {  // hourglass
                    const double m = double(s - 1) / 2.0;
                    hit = std::abs(double(lc) - m) <= std::abs(double(lr) - m);
                    break;
                }
                case 5:  // dot-grid
                    hit = r % 4 == 1 && col % 4 == 1;
                    break;
                case 6:  // lower-triangle
                    hit = lr >= lc;
                    break;
                case 7:  // top-wedge
                    hit = lr <= lc && lr <= long(s) - 1 - lc;
                    break;
                default:
                    fail_invalid("unknown out-of-distribution template id");
            }
            if (hit) img.at(r, col) = kFg;
        }
    }
    return img;
}

void add_noise_clip(Tensor& img, double sigma, Rng& rng) {
    if (sigma > 0.0)
        for (double& v : img.data) v += sigma * rng.normal();
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

std::string encode_image_hex(const Tensor& img) { return encode_doubles_hex(img.data); }

Tensor decode_image_hex(const std::string& hex, size_t side, size_t byte_offset) {
    return Tensor({side, side},
                  decode_doubles_hex(hex, side * side,
                                     "row at byte " + std::to_string(byte_offset)));
}

}  // namespace

const std::vector<std::string>& in_dist_template_names() {
    static const std::vector<std::string> names = {
        "horizontal-bar", "vertical-bar",   "cross",
        "diagonal-stripe", "anti-diagonal-stripe", "disk",
        "ring",            "corner-blocks", "frame",
        "opposite-quadrants", "double-horizontal-bars", "double-vertical-bars"};
    return names;
}

const std::vector<std::string>& ood_template_names() {
    static const std::vector<std::string> names = {
        "zigzag",    "ramp",     "diagonal-grid",  "uniform-noise",
        "hourglass", "dot-grid", "lower-triangle", "top-wedge"};
    return names;
}

Dataset gen_in_distribution(size_t classes, size_t side, size_t per_class,
                            double noise_sigma, uint64_t seed, const std::string& name) {
    if (classes < 2) fail_invalid("gen_in_distribution: need at least 2 classes");
    if (classes > in_dist_template_names().size())
        fail_invalid("gen_in_distribution: at most " +
                     std::to_string(in_dist_template_names().size()) +
                     " classes are available");
    if (side < 6) fail_invalid("gen_in_distribution: side must be at least 6");
    if (per_class == 0) fail_invalid("gen_in_distribution: per_class must be positive");
    if (noise_sigma < 0.0) fail_invalid("gen_in_distribution: negative noise_sigma");

    Dataset d;
    d.name = name;
    d.kind = DatasetKind::InDistribution;
    d.side = side;
    d.classes = classes;
    Rng rng(seed);
    for (size_t cls = 0; cls < classes; ++cls) {
        const Tensor base = paint_in_dist(cls, side);
        for (size_t i = 0; i < per_class; ++i) {
            Tensor img = base;
            add_noise_clip(img, noise_sigma, rng);
            d.images.push_back(std::move(img));
            d.labels.push_back(int(cls));
        }
    }
    return d;
}

Dataset gen_ood(size_t side, size_t count, uint64_t seed, const std::string& name) {
    if (side < 6) fail_invalid("gen_ood: side must be at least 6");
    Dataset d;
    d.name = name;
    d.kind = DatasetKind::Ood;
    d.side = side;
    d.classes = 0;
    Rng rng(seed);
    const size_t ntpl = ood_template_names().size();
    for (size_t i = 0; i < count; ++i) {
        Tensor img = paint_ood(i % ntpl, side, rng);
        add_noise_clip(img, 0.06, rng);
        d.images.push_back(std::move(img));
    }
    return d;
}

void save_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_data("cannot open '" + path + "' for writing");
    json header;
    header["version"] = 1;
    header["name"] = data.name;
    header["kind"] = data.kind == DatasetKind::Ood ? "ood" : "in-distribution";
    header["side"] = data.side;
    header["classes"] = data.classes;
    header["count"] = data.count();
    out << header.dump() << "\n";
    for (size_t i = 0; i < data.count(); ++i) {
        if (data.kind == DatasetKind::Ood)
            out << "- ";
        else
            out << data.labels[i] << " ";
        out << encode_image_hex(data.images[i]) << "\n";
    }
    if (!out) fail_data("failed writing '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_data("cannot open dataset file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) fail_data("dataset file '" + path + "' is empty");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        fail_data("dataset header parse error in '" + path + "': " + e.what());
    }
    Dataset d;
    size_t count = 0;
    try {
        const int version = header.at("version").get<int>();
        if (version != 1)
            fail_data("unsupported dataset version " + std::to_string(version) +
                      " in '" + path + "'");
        d.name = header.at("name").get<std::string>();
        const std::string kind = header.at("kind").get<std::string>();
        if (kind == "ood")
            d.kind = DatasetKind::Ood;
        else if (kind == "in-distribution")
            d.kind = DatasetKind::InDistribution;
        else
            fail_data("unknown dataset kind '" + kind + "'");
        d.side = header.at("side").get<size_t>();
        d.classes = header.at("classes").get<size_t>();
        count = header.at("count").get<size_t>();
    } catch (const json::exception& e) {
        fail_data("dataset header schema error in '" + path + "': " + e.what());
    }
    if (d.side < 1) fail_data("dataset side must be positive");

    size_t offset = line.size() + 1;
    while (std::getline(in, line)) {
        if (line.empty()) {
            offset += 1;
            continue;
        }
        const size_t sep = line.find(' ');
        if (sep == std::string::npos)
            fail_data("missing label separator in dataset row at byte " +
                      std::to_string(offset));
        const std::string label_tok = line.substr(0, sep);
        if (d.kind == DatasetKind::Ood) {
            if (label_tok != "-")
                fail_data("ood dataset rows must carry '-' instead of a label (byte " +
                          std::to_string(offset) + ")");
        } else {
            try {
                const int y = std::stoi(label_tok);
                if (y < 0 || size_t(y) >= d.classes)
                    fail_data("label " + std::to_string(y) + " out of range at byte " +
                              std::to_string(offset));
                d.labels.push_back(y);
            } catch (const std::invalid_argument&) {
                fail_data("bad label token '" + label_tok + "' at byte " +
                          std::to_string(offset));
            } catch (const std::out_of_range&) {
                fail_data("label out of range at byte " + std::to_string(offset));
            }
        }
        Tensor img = decode_image_hex(line.substr(sep + 1), d.side, offset + sep + 1);
        for (double v : img.data)
            if (!(v >= 0.0 && v <= 1.0))
                fail_data("pixel outside [0,1] in dataset row at byte " +
                          std::to_string(offset));
        d.images.push_back(std::move(img));
        offset += line.size() + 1;
    }
    if (d.count() != count)
        fail_data("dataset '" + path + "' is truncated: header promises " +
                  std::to_string(count) + " rows, found " + std::to_string(d.count()));
    return d;
}

}  // namespace xens
