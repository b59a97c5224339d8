// Spatial pyramid pooling over the backbone grid, per-view embedding, and
// concatenation-based multi-view fusion.
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "progressd/common.hpp"
#include "progressd/optim.hpp"
#include "progressd/tensor.hpp"
#include "progressd/views.hpp"

namespace progressd::fusion {

using nn::Tensor;

inline constexpr int kEmbedWidth = 512;
inline constexpr int kFusedWidth = 64;
inline constexpr int kPyramidFactor = 1 + 4 + 9; // 1x1 + 2x2 + 3x3 cells

// Max pooling to 1x1, 2x2 and 3x3 grids, flattened and concatenated in that
// order; a DxHxW grid becomes a vector of length 14*D.
inline Tensor spp(const Tensor& featmap) {
    check(featmap.shape().size() == 3, "spp: input must be DxHxW, got ",
          nn::shape_str(featmap.shape()));
    const int d = featmap.shape()[0];
    check(featmap.shape()[1] >= 3 && featmap.shape()[2] >= 3,
          "spp: grid ", featmap.shape()[1], "x", featmap.shape()[2],
          " is smaller than the 3x3 pyramid level");
    std::vector<Tensor> levels;
    for (int n : {1, 2, 3}) {
        Tensor pooled = nn::adaptive_max_pool2d(featmap, n, n);
        levels.push_back(nn::reshape(pooled, {1, d * n * n}));
    }
    return nn::concat(levels, 1);
}

struct ViewEmbedding {
    View view;
    Tensor vec; // 1 x 512
};

struct EmbedParams {
    Tensor w; // 14*D x 512
    Tensor b; // 1 x 512
};

struct FuseParams {
    Tensor w; // 3*512 x 64
    Tensor b; // 1 x 64
};

namespace detail {

inline Tensor fan_in_uniform(nn::Shape shape, int fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    auto n = static_cast<std::size_t>(nn::numel(shape));
    std::vector<double> data(n);
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

} // namespace detail

inline EmbedParams init_embed_params(int spp_len, Rng& rng) {
    check(spp_len >= 1, "embed: spp length must be positive");
    return {detail::fan_in_uniform({spp_len, kEmbedWidth}, spp_len, rng),
            Tensor::zeros({1, kEmbedWidth}, true)};
}

inline FuseParams init_fuse_params(Rng& rng) {
    const int in = 3 * kEmbedWidth;
    return {detail::fan_in_uniform({in, kFusedWidth}, in, rng),
            Tensor::zeros({1, kFusedWidth}, true)};
}

// affine -> dropout -> relu, to width 512.
inline ViewEmbedding embed_view(View view, const Tensor& spp_vec,
                                const EmbedParams& params, bool train,
                                double dropout_rate, Rng& rng) {
    check(spp_vec.shape().size() == 2 && spp_vec.shape()[0] == 1,
          "embed_view: input must be a 1xK row vector, got ",
          nn::shape_str(spp_vec.shape()));
    check(spp_vec.shape()[1] == params.w.shape()[0],
          "embed_view: input length ", spp_vec.shape()[1],
          " does not match embedding params (", params.w.shape()[0], ")");
    Tensor h = nn::affine(spp_vec, params.w, params.b);
    h = nn::dropout(h, dropout_rate, train, rng);
    return {view, nn::relu(h)};
}

// Concatenates embeddings in the fixed order left, central, right, zero-fills
// the masked-out slots so the fusion input is always 1536 wide, then
// affine -> dropout -> relu to width 64.
inline Tensor fuse_views(const std::vector<ViewEmbedding>& embeddings,
                         const ViewMask& mask, const FuseParams& params,
                         bool train, double dropout_rate, Rng& rng) {
    check(mask.count() > 0, "fuse_views: empty view mask");
    check(static_cast<int>(embeddings.size()) == mask.count(),
          "fuse_views: got ", embeddings.size(), " embeddings for a mask of ",
          mask.count(), " views");
    std::array<const ViewEmbedding*, 3> slot = {nullptr, nullptr, nullptr};
    for (const auto& e : embeddings) {
        check(mask[e.view], "fuse_views: embedding for masked-out view '",
              view_name(e.view), "'");
        auto& s = slot[static_cast<int>(e.view)];
        check(s == nullptr, "fuse_views: duplicate embedding for view '",
              view_name(e.view), "'");
        check(e.vec.shape() == nn::Shape({1, kEmbedWidth}),
              "fuse_views: embedding for '", view_name(e.view), "' has shape ",
              nn::shape_str(e.vec.shape()));
        s = &e;
    }
    std::vector<Tensor> parts;
    parts.reserve(3);
    for (View v : kAllViews) {
        const auto* s = slot[static_cast<int>(v)];
        parts.push_back(s ? s->vec : Tensor::zeros({1, kEmbedWidth}));
    }
    Tensor h = nn::affine(nn::concat(parts, 1), params.w, params.b);
    h = nn::dropout(h, dropout_rate, train, rng);
    return nn::relu(h);
}

} // namespace progressd::fusion
