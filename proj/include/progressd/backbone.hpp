// Per-frame feature extractors: a tiny ViT-style encoder and a tiny strided
// CNN, both producing a DxGxG feature grid.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "progressd/common.hpp"
#include "progressd/optim.hpp"
#include "progressd/tensor.hpp"

namespace progressd::backbone {

using nn::Tensor;

enum class Kind { vit, cnn };

struct BackboneConfig {
    Kind kind = Kind::vit;
    int image_size = 32;
    int channels_in = 3;
    int patch_size = 8;          // vit
    int embed_dim = 32;          // vit
    int depth = 2;               // vit encoder blocks
    int heads = 4;               // vit
    std::vector<int> cnn_widths = {8, 16, 32};
};

// Output spatial extent after the strided conv cascade: k3 s2 p1 halves and
// rounds up, so H -> (H - 1) / 2 + 1.
inline int cnn_out_extent(const BackboneConfig& cfg) {
    int e = cfg.image_size;
    for (std::size_t i = 0; i < cfg.cnn_widths.size(); ++i) e = (e - 1) / 2 + 1;
    return e;
}

inline void validate(const BackboneConfig& cfg) {
    check(cfg.image_size >= 1, "backbone: image size must be positive");
    check(cfg.channels_in >= 1, "backbone: channels-in must be positive");
    if (cfg.kind == Kind::vit) {
        check(cfg.patch_size >= 1 && cfg.image_size % cfg.patch_size == 0,
              "backbone: patch size ", cfg.patch_size, " must divide image size ",
              cfg.image_size);
        check(cfg.embed_dim >= 1, "backbone: embed dim must be positive");
        check(cfg.heads >= 1 && cfg.embed_dim % cfg.heads == 0,
              "backbone: heads ", cfg.heads, " must divide embed dim ",
              cfg.embed_dim);
        check(cfg.depth >= 0, "backbone: depth must be >= 0");
    } else {
        check(!cfg.cnn_widths.empty(), "backbone: cnn needs at least one stage");
        for (int w : cfg.cnn_widths)
            check(w >= 1, "backbone: cnn stage width must be positive");
        check(cnn_out_extent(cfg) >= 3, "backbone: cnn output grid ",
              cnn_out_extent(cfg), "x", cnn_out_extent(cfg),
              " is too small for the 3x3 pyramid level");
    }
}

inline int out_channels(const BackboneConfig& cfg) {
    return cfg.kind == Kind::vit ? cfg.embed_dim : cfg.cnn_widths.back();
}

inline int out_extent(const BackboneConfig& cfg) {
    return cfg.kind == Kind::vit ? cfg.image_size / cfg.patch_size
                                 : cnn_out_extent(cfg);
}

struct EncoderBlockParams {
    Tensor ln1_gamma, ln1_beta;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_gamma, ln2_beta;
    Tensor mlp1_w, mlp1_b, mlp2_w, mlp2_b;
};

struct BackboneParams {
    // vit
    Tensor patch_kernel, patch_bias, class_token, pos_embed;
    std::vector<EncoderBlockParams> blocks;
    // cnn
    std::vector<Tensor> stage_kernels, stage_biases;
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

inline BackboneParams init_params(const BackboneConfig& cfg, Rng& rng) {
    validate(cfg);
    BackboneParams p;
    if (cfg.kind == Kind::vit) {
        const int d = cfg.embed_dim, ps = cfg.patch_size, ci = cfg.channels_in;
        const int g = cfg.image_size / ps;
        const int tokens = g * g + 1;
        p.patch_kernel = detail::fan_in_uniform({d, ci, ps, ps}, ci * ps * ps, rng);
        p.patch_bias = Tensor::zeros({d}, true);
        p.class_token = detail::fan_in_uniform({1, d}, d, rng);
        p.pos_embed = detail::fan_in_uniform({tokens, d}, d, rng);
        for (int b = 0; b < cfg.depth; ++b) {
            EncoderBlockParams blk;
            blk.ln1_gamma = Tensor::full({1, d}, 1.0, true);
            blk.ln1_beta = Tensor::zeros({1, d}, true);
            blk.wq = detail::fan_in_uniform({d, d}, d, rng);
            blk.bq = Tensor::zeros({1, d}, true);
            blk.wk = detail::fan_in_uniform({d, d}, d, rng);
            blk.bk = Tensor::zeros({1, d}, true);
            blk.wv = detail::fan_in_uniform({d, d}, d, rng);
            blk.bv = Tensor::zeros({1, d}, true);
            blk.wo = detail::fan_in_uniform({d, d}, d, rng);
            blk.bo = Tensor::zeros({1, d}, true);
            blk.ln2_gamma = Tensor::full({1, d}, 1.0, true);
            blk.ln2_beta = Tensor::zeros({1, d}, true);
            blk.mlp1_w = detail::fan_in_uniform({d, 2 * d}, d, rng);
            blk.mlp1_b = Tensor::zeros({1, 2 * d}, true);
            blk.mlp2_w = detail::fan_in_uniform({2 * d, d}, 2 * d, rng);
            blk.mlp2_b = Tensor::zeros({1, d}, true);
            p.blocks.push_back(std::move(blk));
        }
    } else {
        int ci = cfg.channels_in;
        for (int width : cfg.cnn_widths) {
            p.stage_kernels.push_back(
                detail::fan_in_uniform({width, ci, 3, 3}, ci * 9, rng));
            p.stage_biases.push_back(Tensor::zeros({width}, true));
            ci = width;
        }
    }
    return p;
}

inline void append_params(nn::ParamList& out, const std::string& prefix,
                          const BackboneConfig& cfg, const BackboneParams& p) {
    if (cfg.kind == Kind::vit) {
        out.push_back({prefix + ".patch.kernel", p.patch_kernel});
        out.push_back({prefix + ".patch.bias", p.patch_bias});
        out.push_back({prefix + ".class_token", p.class_token});
        out.push_back({prefix + ".pos_embed", p.pos_embed});
        for (std::size_t b = 0; b < p.blocks.size(); ++b) {
            const auto& blk = p.blocks[b];
            std::string bp = prefix + ".block" + std::to_string(b);
            out.push_back({bp + ".ln1.gamma", blk.ln1_gamma});
            out.push_back({bp + ".ln1.beta", blk.ln1_beta});
            out.push_back({bp + ".attn.wq", blk.wq});
            out.push_back({bp + ".attn.bq", blk.bq});
            out.push_back({bp + ".attn.wk", blk.wk});
            out.push_back({bp + ".attn.bk", blk.bk});
            out.push_back({bp + ".attn.wv", blk.wv});
            out.push_back({bp + ".attn.bv", blk.bv});
            out.push_back({bp + ".attn.wo", blk.wo});
            out.push_back({bp + ".attn.bo", blk.bo});
            out.push_back({bp + ".ln2.gamma", blk.ln2_gamma});
            out.push_back({bp + ".ln2.beta", blk.ln2_beta});
            out.push_back({bp + ".mlp.w1", blk.mlp1_w});
            out.push_back({bp + ".mlp.b1", blk.mlp1_b});
            out.push_back({bp + ".mlp.w2", blk.mlp2_w});
            out.push_back({bp + ".mlp.b2", blk.mlp2_b});
        }
    } else {
        for (std::size_t s = 0; s < p.stage_kernels.size(); ++s) {
            std::string sp = prefix + ".stage" + std::to_string(s);
            out.push_back({sp + ".kernel", p.stage_kernels[s]});
            out.push_back({sp + ".bias", p.stage_biases[s]});
        }
    }
}

namespace detail {

inline Tensor attention(const Tensor& x, const EncoderBlockParams& blk, int heads) {
    const int n = x.shape()[0], d = x.shape()[1];
    const int dh = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor q = nn::affine(x, blk.wq, blk.bq);
    Tensor k = nn::affine(x, blk.wk, blk.bk);
    Tensor v = nn::affine(x, blk.wv, blk.bv);
    std::vector<Tensor> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = nn::slice2d(q, 0, n, h * dh, (h + 1) * dh);
        Tensor kh = nn::slice2d(k, 0, n, h * dh, (h + 1) * dh);
        Tensor vh = nn::slice2d(v, 0, n, h * dh, (h + 1) * dh);
        Tensor scores = nn::scale(nn::matmul(qh, nn::transpose2d(kh)), att_scale);
        head_outs.push_back(nn::matmul(nn::softmax_rows(scores), vh));
    }
    return nn::affine(nn::concat(head_outs, 1), blk.wo, blk.bo);
}

} // namespace detail

// ViT-style extraction: patch projection, class token, learned positional
// embeddings, pre-norm encoder blocks. The class token rides through the
// encoder but is dropped from the returned grid.
inline Tensor vit_forward(const Tensor& frame, const BackboneConfig& cfg,
                          const BackboneParams& p) {
    validate(cfg);
    check(cfg.kind == Kind::vit, "vit_forward: config kind is not vit");
    check(frame.shape() ==
              nn::Shape({cfg.channels_in, cfg.image_size, cfg.image_size}),
          "vit_forward: frame shape ", nn::shape_str(frame.shape()),
          " does not match config");
    const int d = cfg.embed_dim;
    const int g = cfg.image_size / cfg.patch_size;
    const int n = g * g;

    Tensor patches = nn::conv2d(frame, p.patch_kernel, p.patch_bias,
                                cfg.patch_size, 0); // d x g x g
    Tensor tokens = nn::transpose2d(nn::reshape(patches, {d, n})); // n x d
    Tensor x = nn::add(nn::concat({p.class_token, tokens}, 0), p.pos_embed);
    for (const auto& blk : p.blocks) {
        Tensor ln1 = nn::layernorm_rows(x, blk.ln1_gamma, blk.ln1_beta);
        x = nn::add(x, detail::attention(ln1, blk, cfg.heads));
        Tensor ln2 = nn::layernorm_rows(x, blk.ln2_gamma, blk.ln2_beta);
        Tensor hidden = nn::relu(nn::affine(ln2, blk.mlp1_w, blk.mlp1_b));
        x = nn::add(x, nn::affine(hidden, blk.mlp2_w, blk.mlp2_b));
    }
    Tensor grid_tokens = nn::slice2d(x, 1, n + 1, 0, d);
    return nn::reshape(nn::transpose2d(grid_tokens), {d, g, g});
}

// Strided conv cascade; the feature grid before any classification head.
inline Tensor cnn_forward(const Tensor& frame, const BackboneConfig& cfg,
                          const BackboneParams& p) {
    validate(cfg);
    check(cfg.kind == Kind::cnn, "cnn_forward: config kind is not cnn");
    check(frame.shape() ==
              nn::Shape({cfg.channels_in, cfg.image_size, cfg.image_size}),
          "cnn_forward: frame shape ", nn::shape_str(frame.shape()),
          " does not match config");
    Tensor x = frame;
    for (std::size_t s = 0; s < p.stage_kernels.size(); ++s)
        x = nn::relu(nn::conv2d(x, p.stage_kernels[s], p.stage_biases[s], 2, 1));
    return x;
}

inline Tensor forward(const Tensor& frame, const BackboneConfig& cfg,
                      const BackboneParams& p) {
    return cfg.kind == Kind::vit ? vit_forward(frame, cfg, p)
                                 : cnn_forward(frame, cfg, p);
}

} // namespace progressd::backbone
