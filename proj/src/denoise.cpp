#include "xens/denoise.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "xens/error.hpp"

namespace xens {

namespace {

// Reflect-with-edge-duplication index mapping: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
long reflect(long i, long n) {
    while (i < 0 || i >= n) i = (i < 0) ? -i - 1 : 2 * n - 1 - i;
    return i;
}

std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool parse_int(const std::string& tok, long& out) {
    if (tok.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stol(tok, &pos);
    } catch (...) {
        return false;
    }
    return pos == tok.size();
}

bool parse_num(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stod(tok, &pos);
    } catch (...) {
        return false;
    }
    return pos == tok.size();
}

[[noreturn]] void bad_name(const std::string& name, const std::string& why) {
    fail_config("cannot parse denoiser '" + name + "': " + why);
}

std::string trim_num(double v) {
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        std::ostringstream os;
        os << (long long)(v);
        return os.str();
    }
    std::ostringstream os;
    os << v;
    return os.str();
}

void check_square(const Tensor& img, const char* who) {
    if (img.shape.size() != 2) fail_dim(std::string(who) + ": image must be 2-D");
    if (img.rows() != img.cols()) fail_dim(std::string(who) + ": image must be square");
}

}  // namespace

std::string DenoiserSpec::canonical_name() const {
    std::ostringstream os;
    switch (kind) {
        case DenoiserKind::Quantize: os << "quan-" << bits << "-bit"; break;
        case DenoiserKind::Median: os << "medFilter-" << k << "*" << k; break;
        case DenoiserKind::Nlm:
            os << "NLM-" << search << "-" << patch << "-" << trim_num(strength);
            break;
        case DenoiserKind::Rotate: os << "rotation_" << degrees; break;
    }
    return os.str();
}

bool DenoiserSpec::operator==(const DenoiserSpec& o) const {
    return kind == o.kind && bits == o.bits && k == o.k && search == o.search &&
           patch == o.patch && strength == o.strength && degrees == o.degrees;
}

DenoiserSpec parse_denoiser(const std::string& name) {
    const std::string low = lower(name);
    DenoiserSpec spec;

    auto after_prefix = [&](const std::string& prefix) -> std::string {
        std::string rest = name.substr(prefix.size());
        if (!rest.empty() && (rest[0] == '-' || rest[0] == '_')) rest = rest.substr(1);
        return rest;
    };

    if (low.rfind("quan", 0) == 0) {
        // quan-<bits>-bit
        std::string rest = after_prefix("quan");
        const size_t dash = rest.find('-');
        if (dash == std::string::npos) bad_name(name, "expected quan-<bits>-bit");
        long bits;
        if (!parse_int(rest.substr(0, dash), bits)) bad_name(name, "bad bit count");
        const std::string suffix = lower(rest.substr(dash + 1));
        if (suffix != "bit" && suffix != "bits") bad_name(name, "expected '-bit' suffix");
        if (bits < 1 || bits > 8)
            bad_name(name, "bit depth must be in [1,8]");
        spec.kind = DenoiserKind::Quantize;
        spec.bits = int(bits);
        return spec;
    }

    if (low.rfind("medfilter", 0) == 0 || low.rfind("med", 0) == 0) {
        const std::string prefix = low.rfind("medfilter", 0) == 0 ? "medfilter" : "med";
        std::string rest = after_prefix(prefix);
        const size_t star = rest.find('*');
        if (star == std::string::npos) bad_name(name, "expected medFilter-<k>*<k>");
        long k1, k2;
        if (!parse_int(rest.substr(0, star), k1) || !parse_int(rest.substr(star + 1), k2))
            bad_name(name, "bad window size");
        if (k1 != k2) bad_name(name, "window must be square");
        if (k1 < 1) bad_name(name, "window size must be positive");
        spec.kind = DenoiserKind::Median;
        spec.k = int(k1);
        return spec;
    }

    if (low.rfind("nlm", 0) == 0) {
        std::string rest = after_prefix("nlm");
        std::vector<std::string> parts;
        std::stringstream ss(rest);
        std::string tok;
        while (std::getline(ss, tok, '-')) parts.push_back(tok);
        if (parts.size() != 3) bad_name(name, "expected NLM-<a>-<b>-<c>");
        long a, b;
        double c;
        if (!parse_int(parts[0], a) || !parse_int(parts[1], b) || !parse_num(parts[2], c))
            bad_name(name, "bad NLM parameters");
        if (a % 2 == 0 || b % 2 == 0) bad_name(name, "search and patch sizes must be odd");
        if (!(a > b)) bad_name(name, "search window must exceed patch size");
        if (b < 1) bad_name(name, "patch size must be positive");
        if (!(c > 0)) bad_name(name, "filter strength must be positive");
        spec.kind = DenoiserKind::Nlm;
        spec.search = int(a);
        spec.patch = int(b);
        spec.strength = c;
        return spec;
    }

    if (low.rfind("rotation", 0) == 0 || low.rfind("rot", 0) == 0) {
        const std::string prefix = low.rfind("rotation", 0) == 0 ? "rotation" : "rot";
        std::string rest = after_prefix(prefix);
        long deg;
        if (!parse_int(rest, deg)) bad_name(name, "bad rotation angle");
        if (deg < -180 || deg > 180) bad_name(name, "angle must be in [-180,180]");
        spec.kind = DenoiserKind::Rotate;
        spec.degrees = int(deg);
        return spec;
    }

    bad_name(name, "unknown denoiser family");
}

Tensor quantize(const Tensor& img, int bits) {
    if (bits < 1 || bits > 8) fail_invalid("quantize: bit depth must be in [1,8]");
    const double levels = double((1 << bits) - 1);
    const double spacing = 255.0 / levels;
    Tensor out = img;
    for (double& v : out.data) {
        double idx = std::floor(v * 255.0 / spacing + 0.5);
        idx = std::clamp(idx, 0.0, levels);
        v = idx * spacing / 255.0;
    }
    return out;
}

Tensor median_filter(const Tensor& img, int k) {
    check_square(img, "median_filter");
    const long n = long(img.rows());
    if (k < 1) fail_invalid("median_filter: window size must be positive");
    if (long(k) > n)
        fail_dim("median_filter: window " + std::to_string(k) + "x" + std::to_string(k) +
                 " exceeds image side " + std::to_string(n));
    const long lo = (k % 2 == 1) ? -(k - 1) / 2 : -(k / 2 - 1);
    const long hi = (k % 2 == 1) ? (k - 1) / 2 : k / 2;
    Tensor out = img;
    std::vector<double> window;
    window.reserve(size_t(k) * size_t(k));
    for (long r = 0; r < n; ++r) {
        for (long c = 0; c < n; ++c) {
            window.clear();
            for (long dr = lo; dr <= hi; ++dr)
                for (long dc = lo; dc <= hi; ++dc)
                    window.push_back(img.at(size_t(reflect(r + dr, n)),
                                            size_t(reflect(c + dc, n))));
            std::sort(window.begin(), window.end());
            const size_t m = window.size();
            out.at(size_t(r), size_t(c)) =
                (m % 2 == 1) ? window[m / 2]
                             : 0.5 * (window[m / 2 - 1] + window[m / 2]);
        }
    }
    return out;
}

Tensor nlm(const Tensor& img, int search, int patch, double strength) {
    check_square(img, "nlm");
    if (search % 2 == 0 || patch % 2 == 0 || search <= patch || patch < 1)
        fail_invalid("nlm: need odd search > odd patch >= 1");
    if (!(strength > 0)) fail_invalid("nlm: filter strength must be positive");
    const long n = long(img.rows());
    const long sr = (search - 1) / 2;
    const long pr = (patch - 1) / 2;
    const double inv_c2 = 1.0 / (strength * strength);
    const double patch_count = double(patch) * double(patch);
    Tensor out = img;
    for (long r = 0; r < n; ++r) {
        for (long c = 0; c < n; ++c) {
            double wsum = 0.0, acc = 0.0;
            for (long dr = -sr; dr <= sr; ++dr) {
                for (long dc = -sr; dc <= sr; ++dc) {
                    const long rr = r + dr, cc = c + dc;
                    double d2 = 0.0;
                    for (long pr_ = -pr; pr_ <= pr; ++pr_) {
                        for (long pc = -pr; pc <= pr; ++pc) {
                            const double va = img.at(size_t(reflect(r + pr_, n)),
                                                     size_t(reflect(c + pc, n)));
                            const double vb = img.at(size_t(reflect(rr + pr_, n)),
                                                     size_t(reflect(cc + pc, n)));
                            const double diff = (va - vb) * 255.0;
                            d2 += diff * diff;
                        }
                    }
                    d2 /= patch_count;
                    const double w = std::exp(-d2 * inv_c2);
                    wsum += w;
                    acc += w * img.at(size_t(reflect(rr, n)), size_t(reflect(cc, n)));
                }
            }
            out.at(size_t(r), size_t(c)) = acc / wsum;
        }
    }
    return out;
}

Tensor rotate(const Tensor& img, double degrees) {
    check_square(img, "rotate");
    const long n = long(img.rows());
    const double theta = degrees * M_PI / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double center = (double(n) - 1.0) / 2.0;
    Tensor out = img;
    for (long r = 0; r < n; ++r) {
        for (long c = 0; c < n; ++c) {
            const double dx = double(c) - center;
            const double dy = double(r) - center;
            // inverse map; positive angle is counterclockwise on screen
            const double sx = center + ct * dx - st * dy;
            const double sy = center + st * dx + ct * dy;
            const long x0 = long(std::floor(sx));
            const long y0 = long(std::floor(sy));
            const double fx = sx - double(x0);
            const double fy = sy - double(y0);
            double v = 0.0;
            for (int dyi = 0; dyi <= 1; ++dyi) {
                for (int dxi = 0; dxi <= 1; ++dxi) {
                    const double w = (dxi ? fx : 1.0 - fx) * (dyi ? fy : 1.0 - fy);
                    v += w * img.at(size_t(reflect(y0 + dyi, n)),
                                    size_t(reflect(x0 + dxi, n)));
                }
            }
            out.at(size_t(r), size_t(c)) = v;
        }
    }
    return out;
}

Tensor apply_denoiser(const DenoiserSpec& spec, const Tensor& img) {
    switch (spec.kind) {
        case DenoiserKind::Quantize: return quantize(img, spec.bits);
        case DenoiserKind::Median: return median_filter(img, spec.k);
        case DenoiserKind::Nlm: return nlm(img, spec.search, spec.patch, spec.strength);
        case DenoiserKind::Rotate: return rotate(img, double(spec.degrees));
    }
    fail_invalid("unknown denoiser kind");
}

std::vector<Tensor> denoise_ensemble(const Tensor& img,
                                     const std::vector<DenoiserSpec>& specs) {
    std::vector<Tensor> out;
    out.reserve(specs.size() + 1);
    out.push_back(img);
    for (const DenoiserSpec& s : specs) out.push_back(apply_denoiser(s, img));
    return out;
}

}  // namespace xens
