#pragma once

#include <string>
#include <vector>

#include "xens/tensor.hpp"

namespace xens {

enum class DenoiserKind { Quantize, Median, Nlm, Rotate };

// A parsed denoiser. Canonical names follow the grammar
//   quan-<bits>-bit | medFilter-<k>*<k> | NLM-<a>-<b>-<c> | rotation_<deg>
// parse_denoiser also accepts the short aliases med_<k>*<k>, med-<k>*<k>,
// medfilter-<k>*<k>, rot_<deg> and rot-<deg>, normalizing them to the
// canonical form.
struct DenoiserSpec {
    DenoiserKind kind = DenoiserKind::Quantize;
    int bits = 0;        // quantize
    int k = 0;           // median window
    int search = 0;      // NLM search window a
    int patch = 0;       // NLM patch b
    double strength = 0; // NLM filter strength c
    int degrees = 0;     // rotation

    std::string canonical_name() const;
    bool operator==(const DenoiserSpec& o) const;
};

DenoiserSpec parse_denoiser(const std::string& name);

// Color-depth reduction: 2^bits uniform levels spanning [0,255] on the
// 8-bit scale, nearest level wins, halfway rounds up.
Tensor quantize(const Tensor& img, int bits);

// k x k spatial median with reflect padding. Even k anchors the window
// with the pixel at the top-left of its central 2x2; an even sample
// count takes the mean of the two middle values.
Tensor median_filter(const Tensor& img, int k);

// Non-local means: a x a search window, b x b patches, weights
// exp(-D^2/c^2) where D^2 is the mean squared patch difference measured
// on the 0..255 scale. Both window sizes odd, a > b.
Tensor nlm(const Tensor& img, int search, int patch, double strength);

// Rotation about the image center, bilinear interpolation, reflect fill,
// output shape unchanged. Positive degrees turn counterclockwise when
// row 0 is displayed on top.
Tensor rotate(const Tensor& img, double degrees);

Tensor apply_denoiser(const DenoiserSpec& spec, const Tensor& img);

// [x, d1(x), ..., dk(x)] in spec order.
std::vector<Tensor> denoise_ensemble(const Tensor& img,
                                     const std::vector<DenoiserSpec>& specs);

}  // namespace xens
