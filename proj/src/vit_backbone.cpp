#include <cmath>
#include <stdexcept>

#include "adkit/backbone.hpp"
#include "adkit/checkpoint.hpp"
#include "adkit/interp.hpp"

namespace adkit {

namespace {

struct Linear {
    RowMatrixF weight;  // (out, in), y = x * W^T + b
    Eigen::VectorXf bias;

    RowMatrixF forward(const RowMatrixF& x) const {
        RowMatrixF y = x * weight.transpose();
        y.rowwise() += bias.transpose();
        return y;
    }
};

struct LayerNorm {
    Eigen::VectorXf weight;
    Eigen::VectorXf bias;
    static constexpr float kEps = 1e-5f;

    void apply_inplace(RowMatrixF& x) const {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            auto row = x.row(r);
            const float mean = row.mean();
            const float var = (row.array() - mean).square().mean();
            const float inv = 1.0f / std::sqrt(var + kEps);
            row = (((row.array() - mean) * inv) * weight.transpose().array() +
                   bias.transpose().array())
                      .matrix();
        }
    }

    RowMatrixF forward(const RowMatrixF& x) const {
        RowMatrixF y = x;
        apply_inplace(y);
        return y;
    }
};

struct Block {
    LayerNorm ln1;
    Linear qkv;  // (3*C_s, C_s)
    Linear attn_out;
    LayerNorm ln2;
    Linear fc1;
    Linear fc2;
};

}  // namespace

struct VitBackbone::Weights {
    RowMatrixF patch_embed;  // (C_s, 3*ps*ps), patch flattened channel-major
    Eigen::VectorXf patch_bias;  // optional, may be size 0
    Eigen::VectorXf class_embedding;
    RowMatrixF pos_embedding;  // (1 + g*g, C_s), already resized to runtime grid
    bool has_ln_pre = false;
    LayerNorm ln_pre;
    std::vector<Block> blocks;
    LayerNorm ln_post;
    RowMatrixF proj;  // (C_s, C); class token only
};

namespace {

RowMatrixF load_matrix(const TensorFileReader& ckpt, const std::string& name, int64_t rows,
                       int64_t cols) {
    const TensorInfo& info = ckpt.info(name);
    if (info.shape.size() != 2 || info.shape[0] != rows || info.shape[1] != cols)
        throw std::runtime_error("backbone weights: tensor '" + name + "' has wrong shape");
    std::vector<float> data = ckpt.read(name);
    return Eigen::Map<const RowMatrixF>(data.data(), rows, cols);
}

Eigen::VectorXf load_vector(const TensorFileReader& ckpt, const std::string& name, int64_t n) {
    const TensorInfo& info = ckpt.info(name);
    if (info.shape.size() != 1 || info.shape[0] != n)
        throw std::runtime_error("backbone weights: tensor '" + name + "' has wrong shape");
    std::vector<float> data = ckpt.read(name);
    return Eigen::Map<const Eigen::VectorXf>(data.data(), n);
}

LayerNorm load_ln(const TensorFileReader& ckpt, const std::string& prefix, int64_t n) {
    return {load_vector(ckpt, prefix + ".weight", n), load_vector(ckpt, prefix + ".bias", n)};
}

float quick_gelu(float x) { return x / (1.0f + std::exp(-1.702f * x)); }
float exact_gelu(float x) { return 0.5f * x * (1.0f + std::erf(x * 0.70710678f)); }

}  // namespace

VitBackbone::VitBackbone(BackboneSpec spec) : Backbone(std::move(spec)) {
    if (spec_.weights.empty())
        throw std::runtime_error("backbone: vit requires a weights checkpoint path");
    TensorFileReader ckpt(spec_.weights);
    const int cs = spec_.internal_width;
    const int ps = spec_.patch_size;

    w_ = std::make_unique<Weights>();
    try {
        w_->patch_embed = load_matrix(ckpt, "patch_embed.weight", cs, 3LL * ps * ps);
        if (ckpt.has("patch_embed.bias"))
            w_->patch_bias = load_vector(ckpt, "patch_embed.bias", cs);
        w_->class_embedding = load_vector(ckpt, "class_embedding", cs);

        // positional embedding may come from a different pretrained grid
        const TensorInfo& pos_info = ckpt.info("pos_embedding");
        if (pos_info.shape.size() != 2 || pos_info.shape[1] != cs)
            throw std::runtime_error("backbone weights: pos_embedding has wrong width");
        const int64_t tokens = pos_info.shape[0];
        const int g_ck = static_cast<int>(std::lround(std::sqrt(double(tokens - 1))));
        if (1 + static_cast<int64_t>(g_ck) * g_ck != tokens)
            throw std::runtime_error("backbone weights: pos_embedding token count not 1+g^2");
        std::vector<float> pos = ckpt.read("pos_embedding");
        const int g_rt = spec_.grid_side();
        w_->pos_embedding.resize(1 + static_cast<Eigen::Index>(g_rt) * g_rt, cs);
        w_->pos_embedding.row(0) = Eigen::Map<const Eigen::RowVectorXf>(pos.data(), cs);
        std::vector<float> grid_pos(pos.begin() + cs, pos.end());
        grid_pos = bicubic_resize_grid(grid_pos, g_ck, g_rt, cs);
        w_->pos_embedding.bottomRows(static_cast<Eigen::Index>(g_rt) * g_rt) =
            Eigen::Map<const RowMatrixF>(grid_pos.data(), static_cast<Eigen::Index>(g_rt) * g_rt,
                                         cs);

        if (ckpt.has("ln_pre.weight")) {
            w_->has_ln_pre = true;
            w_->ln_pre = load_ln(ckpt, "ln_pre", cs);
        }

        w_->blocks.resize(spec_.num_layers);
        for (int i = 0; i < spec_.num_layers; ++i) {
            const std::string p = "blocks." + std::to_string(i) + ".";
            Block& b = w_->blocks[i];
            b.ln1 = load_ln(ckpt, p + "ln1", cs);
            b.qkv = {load_matrix(ckpt, p + "attn.qkv.weight", 3LL * cs, cs),
                     load_vector(ckpt, p + "attn.qkv.bias", 3LL * cs)};
            b.attn_out = {load_matrix(ckpt, p + "attn.out.weight", cs, cs),
                          load_vector(ckpt, p + "attn.out.bias", cs)};
            b.ln2 = load_ln(ckpt, p + "ln2", cs);
            const TensorInfo& fc1_info = ckpt.info(p + "mlp.fc1.weight");
            if (fc1_info.shape.size() != 2 || fc1_info.shape[1] != cs)
                throw std::runtime_error("backbone weights: bad mlp.fc1 shape in block " +
                                         std::to_string(i));
            const int64_t hidden = fc1_info.shape[0];
            b.fc1 = {load_matrix(ckpt, p + "mlp.fc1.weight", hidden, cs),
                     load_vector(ckpt, p + "mlp.fc1.bias", hidden)};
            b.fc2 = {load_matrix(ckpt, p + "mlp.fc2.weight", cs, hidden),
                     load_vector(ckpt, p + "mlp.fc2.bias", cs)};
        }

        w_->ln_post = load_ln(ckpt, "ln_post", cs);
        w_->proj = load_matrix(ckpt, "proj", cs, spec_.joint_width);
    } catch (const std::out_of_range& e) {
        throw std::runtime_error(std::string("backbone weights: ") + e.what());
    }
}

VitBackbone::~VitBackbone() = default;

namespace {

RowMatrixF attention(const RowMatrixF& x, const Block& b, int num_heads) {
    const Eigen::Index n = x.rows();
    const Eigen::Index cs = x.cols();
    const Eigen::Index hd = cs / num_heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    RowMatrixF qkv = b.qkv.forward(x);  // (n, 3*cs)
    RowMatrixF out(n, cs);
    RowMatrixF scores(n, n);
    for (int h = 0; h < num_heads; ++h) {
        auto q = qkv.middleCols(static_cast<Eigen::Index>(h) * hd, hd);
        auto k = qkv.middleCols(cs + static_cast<Eigen::Index>(h) * hd, hd);
        auto v = qkv.middleCols(2 * cs + static_cast<Eigen::Index>(h) * hd, hd);
        scores.noalias() = q * k.transpose();
        scores *= scale;
        for (Eigen::Index r = 0; r < n; ++r) {
            auto row = scores.row(r);
            const float m = row.maxCoeff();
            row = (row.array() - m).exp();
            row /= row.sum();
        }
        out.middleCols(static_cast<Eigen::Index>(h) * hd, hd).noalias() = scores * v;
    }
    return b.attn_out.forward(out);
}

}  // namespace

BackboneOutput VitBackbone::extract(const ImageTensor& image) const {
    check_input(image);
    const int g = spec_.grid_side();
    const int ps = spec_.patch_size;
    const int cs = spec_.internal_width;
    const Eigen::Index n_patches = static_cast<Eigen::Index>(g) * g;

    // patchify with channel normalization, flatten channel-major
    RowMatrixF patches(n_patches, 3 * ps * ps);
    for (int pr = 0; pr < g; ++pr) {
        for (int pc = 0; pc < g; ++pc) {
            float* dst = patches.row(static_cast<Eigen::Index>(pr) * g + pc).data();
            for (int ch = 0; ch < 3; ++ch) {
                const float mean = spec_.norm_mean[ch];
                const float inv_std = 1.0f / spec_.norm_std[ch];
                for (int r = 0; r < ps; ++r) {
                    const float* src = image.px(pr * ps + r, pc * ps);
                    for (int c = 0; c < ps; ++c)
                        dst[(ch * ps + r) * ps + c] = (src[c * 3 + ch] - mean) * inv_std;
                }
            }
        }
    }

    RowMatrixF tokens(1 + n_patches, cs);
    tokens.row(0) = w_->class_embedding.transpose();
    tokens.bottomRows(n_patches).noalias() = patches * w_->patch_embed.transpose();
    if (w_->patch_bias.size() > 0)
        tokens.bottomRows(n_patches).rowwise() += w_->patch_bias.transpose();
    tokens += w_->pos_embedding;
    if (w_->has_ln_pre) w_->ln_pre.apply_inplace(tokens);

    BackboneOutput out;
    out.grids.reserve(spec_.num_stages());
    size_t next_stage = 0;
    for (int layer = 0; layer < spec_.num_layers; ++layer) {
        const Block& b = w_->blocks[layer];
        tokens += attention(b.ln1.forward(tokens), b, spec_.num_heads);
        RowMatrixF h = b.fc1.forward(b.ln2.forward(tokens));
        if (spec_.gelu == "quick")
            h = h.unaryExpr(&quick_gelu);
        else
            h = h.unaryExpr(&exact_gelu);
        tokens += b.fc2.forward(h);

        if (next_stage < spec_.stage_boundaries.size() &&
            layer + 1 == spec_.stage_boundaries[next_stage]) {
            PatchFeatureGrid grid;
            grid.stage = static_cast<int>(next_stage) + 1;
            grid.h = g;
            grid.w = g;
            grid.feat = tokens.bottomRows(n_patches);
            out.grids.push_back(std::move(grid));
            ++next_stage;
        }
    }

    Eigen::RowVectorXf cls = tokens.row(0);
    RowMatrixF cls_mat(1, cs);
    cls_mat.row(0) = cls;
    w_->ln_post.apply_inplace(cls_mat);
    Eigen::VectorXf projected = (cls_mat * w_->proj).row(0).transpose();
    out.cls.v = projected / projected.norm();
    return out;
}

}  // namespace adkit
