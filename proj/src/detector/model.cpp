#include "involve/detector/model.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "involve/errors.h"
#include "involve/kernels.h"
#include "involve/rng.h"

namespace involve::detector {

namespace {

constexpr double kLnEps = 1e-5;

// Thin pointer wrappers over the row-major kernels.
// c (n x m) = a (n x k) * b (k x m)
void mm(const double* a, std::size_t n, std::size_t k, const double* b, std::size_t m, double* c,
        bool acc) {
    kernels::parallel::gemm_nn({a, n * k}, {n, k}, {b, k * m}, {k, m}, {c, n * m}, acc);
}

// c (n x m) = a (n x k) * b^T, b is (m x k)
void mm_nt(const double* a, std::size_t n, std::size_t k, const double* b, std::size_t m,
           double* c, bool acc) {
    kernels::parallel::gemm_nt({a, n * k}, {n, k}, {b, m * k}, {m, k}, {c, n * m}, acc);
}

// c (k x m) = a^T * b, a is (n x k), b is (n x m)
void mm_tn(const double* a, std::size_t n, std::size_t k, const double* b, std::size_t m,
           double* c, bool acc) {
    kernels::parallel::gemm_tn({a, n * k}, {n, k}, {b, n * m}, {n, m}, {c, k * m}, acc);
}

void add_bias(std::size_t rows, std::size_t cols, const double* bias, double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = x + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += bias[c];
    }
}

void add_col_sums(std::size_t rows, std::size_t cols, const double* x, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = x + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
    }
}

struct LnCache {
    std::vector<double> xhat;
    std::vector<double> inv;
};

void layer_norm(const double* x, std::size_t rows, std::size_t d, const double* gamma,
                const double* beta, double* y, LnCache& cache) {
    cache.xhat.resize(rows * d);
    cache.inv.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += xr[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.inv[r] = inv;
        double* xh = cache.xhat.data() + r * d;
        double* yr = y + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            xh[c] = (xr[c] - mean) * inv;
            yr[c] = gamma[c] * xh[c] + beta[c];
        }
    }
}

// Writes dx; accumulates into dgamma and dbeta.
void layer_norm_backward(const LnCache& cache, std::size_t rows, std::size_t d,
                         const double* gamma, const double* dy, double* dx, double* dgamma,
                         double* dbeta) {
    const double dd = static_cast<double>(d);
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xh = cache.xhat.data() + r * d;
        const double* dyr = dy + r * d;
        double sum = 0.0;
        double sum_x = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            dgamma[c] += dyr[c] * xh[c];
            dbeta[c] += dyr[c];
            dxhat[c] = dyr[c] * gamma[c];
            sum += dxhat[c];
            sum_x += dxhat[c] * xh[c];
        }
        const double scale = cache.inv[r] / dd;
        double* dxr = dx + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            dxr[c] = scale * (dd * dxhat[c] - sum - xh[c] * sum_x);
        }
    }
}

inline double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u / std::numbers::sqrt2)); }

inline double gelu_grad(double u) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(u / std::numbers::sqrt2)) + u * std::exp(-0.5 * u * u) * inv_sqrt_2pi;
}

// Copies columns [col, col + width) of a (rows x stride) matrix.
void take_cols(const double* src, std::size_t rows, std::size_t stride, std::size_t col,
               std::size_t width, double* dst) {
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(src + r * stride + col, width, dst + r * width);
    }
}

void put_cols(const double* src, std::size_t rows, std::size_t stride, std::size_t col,
              std::size_t width, double* dst) {
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(src + r * width, width, dst + r * stride + col);
    }
}

// Weighted cross-entropy of one two-class logit row; adds its gradient
// (scaled by weight) into d when given.
double two_class_ce(const double* logits, int target, double weight, double* d) {
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    const double lse = m + std::log(e0 + e1);
    if (d != nullptr) {
        const double p0 = e0 / (e0 + e1);
        const double p1 = e1 / (e0 + e1);
        d[0] += weight * (p0 - (target == 0 ? 1.0 : 0.0));
        d[1] += weight * (p1 - (target == 1 ? 1.0 : 0.0));
    }
    return weight * (lse - logits[target]);
}

struct LayerCache {
    std::vector<double> x_in;  // R x d
    std::vector<double> q;     // R x d
    std::vector<double> k;     // K x d
    std::vector<double> v;     // K x d
    std::vector<std::vector<double>> probs;  // per head, R x K
    std::vector<double> ctx;   // R x d
    LnCache ln1;
    std::vector<double> h1;  // R x d
    std::vector<double> u;   // R x f
    std::vector<double> g;   // R x f
    LnCache ln2;
};

}  // namespace

struct DualHeadModel::Cache {
    std::size_t rows = 0;
    std::size_t keys = 0;
    LnCache emb_ln;
    std::vector<LayerCache> layers;
    std::vector<double> out;  // R x d
    double y_reg_hat = 0.0;
    std::vector<double> token_logits;  // R x 2
    std::array<double, 2> seq_logits{0.0, 0.0};
};

double DualHeadOutput::involvement() const { return std::clamp(y_reg_hat, 0.0, 1.0); }

double DualHeadOutput::human_probability() const {
    const double m = std::max(sequence_logits[0], sequence_logits[1]);
    const double e0 = std::exp(sequence_logits[0] - m);
    const double e1 = std::exp(sequence_logits[1] - m);
    return e1 / (e0 + e1);
}

std::vector<std::uint8_t> DualHeadOutput::token_predictions() const {
    std::vector<std::uint8_t> out(rows(), 0);
    for (std::size_t i = 0; i < std::min(attention_len, rows()); ++i) {
        out[i] = token_logits[2 * i + 1] > token_logits[2 * i] ? 1 : 0;
    }
    return out;
}

LossParts combined_loss(const DualHeadOutput& output, double y_reg, const TokenLabelVector& y_cls,
                        const std::array<double, 2>& class_weights, bool include_padding) {
    const std::size_t n = include_padding ? output.rows() : output.attention_len;
    if (y_cls.attention_len != output.attention_len) {
        throw ShapeError("label attention_len " + std::to_string(y_cls.attention_len) +
                         " does not match output attention_len " +
                         std::to_string(output.attention_len));
    }
    if (n > output.rows() || y_cls.labels.size() < n) {
        throw ShapeError("token labels do not cover the scored positions");
    }
    if (!std::isfinite(y_reg) || !std::isfinite(output.y_reg_hat)) {
        throw NumericalError("non-finite regression value");
    }
    LossParts parts;
    const double diff = output.y_reg_hat - y_reg;
    parts.mse = diff * diff;
    for (std::size_t i = 0; i < n; ++i) {
        const double* l = output.token_logits.data() + 2 * i;
        if (!std::isfinite(l[0]) || !std::isfinite(l[1])) {
            throw NumericalError("non-finite token logit at position " + std::to_string(i));
        }
        const int t = y_cls.labels[i] ? 1 : 0;
        parts.ce += two_class_ce(l, t, class_weights[static_cast<std::size_t>(t)], nullptr);
    }
    parts.total = parts.mse + parts.ce;
    return parts;
}

EncoderShape shape_for(const DetectorConfig& config, std::size_t vocab_size) {
    EncoderShape s;
    s.vocab_size = vocab_size;
    s.max_len = config.max_len;
    s.hidden = config.hidden;
    s.layers = config.layers;
    s.heads = config.heads;
    s.ffn = config.ffn;
    return s;
}

DualHeadModel::Layout DualHeadModel::make_layout(const EncoderShape& s) {
    if (s.vocab_size == 0 || s.max_len == 0 || s.hidden == 0 || s.layers == 0 || s.heads == 0 ||
        s.ffn == 0 || s.hidden % s.heads != 0) {
        throw ConfigError("invalid encoder shape");
    }
    const std::size_t d = s.hidden;
    const std::size_t f = s.ffn;
    Layout l{};
    std::size_t at = 0;
    auto take = [&at](std::size_t n) {
        const std::size_t o = at;
        at += n;
        return o;
    };
    l.tok_emb = take(s.vocab_size * d);
    l.pos_emb = take(s.max_len * d);
    l.emb_ln_g = take(d);
    l.emb_ln_b = take(d);
    for (std::size_t i = 0; i < s.layers; ++i) {
        LayerOffsets o{};
        o.wq = take(d * d);
        o.bq = take(d);
        o.wk = take(d * d);
        o.bk = take(d);
        o.wv = take(d * d);
        o.bv = take(d);
        o.wo = take(d * d);
        o.bo = take(d);
        o.ln1_g = take(d);
        o.ln1_b = take(d);
        o.w1 = take(d * f);
        o.b1 = take(f);
        o.w2 = take(f * d);
        o.b2 = take(d);
        o.ln2_g = take(d);
        o.ln2_b = take(d);
        l.layers.push_back(o);
    }
    l.reg_w = take(d);
    l.reg_b = take(1);
    l.tok_w = take(d * 2);
    l.tok_b = take(2);
    l.seq_w = take(d * 2);
    l.seq_b = take(2);
    l.total = at;
    return l;
}

DualHeadModel::DualHeadModel(EncoderShape shape, std::uint64_t seed, double init_std)
    : shape_(shape), layout_(make_layout(shape)), params_(layout_.total, 0.0) {
    Rng rng(derive_seed(seed, fnv1a64("detector-init")));
    const std::size_t d = shape_.hidden;
    const std::size_t f = shape_.ffn;
    auto normal = [&](std::size_t offset, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) params_[offset + i] = init_std * rng.normal();
    };
    auto ones = [&](std::size_t offset, std::size_t n) {
        std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(offset), n, 1.0);
    };
    normal(layout_.tok_emb, shape_.vocab_size * d);
    normal(layout_.pos_emb, shape_.max_len * d);
    ones(layout_.emb_ln_g, d);
    for (const auto& o : layout_.layers) {
        normal(o.wq, d * d);
        normal(o.wk, d * d);
        normal(o.wv, d * d);
        normal(o.wo, d * d);
        ones(o.ln1_g, d);
        normal(o.w1, d * f);
        normal(o.w2, f * d);
        ones(o.ln2_g, d);
    }
    normal(layout_.reg_w, d);
    normal(layout_.tok_w, d * 2);
    normal(layout_.seq_w, d * 2);
}

DualHeadModel::DualHeadModel(EncoderShape shape, std::vector<double> params)
    : shape_(shape), layout_(make_layout(shape)), params_(std::move(params)) {
    if (params_.size() != layout_.total) {
        throw ModelLoadError("parameter count " + std::to_string(params_.size()) +
                             " does not match the encoder shape (" +
                             std::to_string(layout_.total) + ")");
    }
}

ParamRange DualHeadModel::regression_head() const { return {layout_.reg_w, shape_.hidden + 1}; }
ParamRange DualHeadModel::token_head() const { return {layout_.tok_w, shape_.hidden * 2 + 2}; }
ParamRange DualHeadModel::sequence_head() const { return {layout_.seq_w, shape_.hidden * 2 + 2}; }

void DualHeadModel::check_inputs(std::span<const std::int32_t> ids, std::size_t attention_len,
                                 std::size_t rows) const {
    if (attention_len == 0 || attention_len > rows || rows > shape_.max_len) {
        throw ShapeError("need 0 < attention_len <= rows <= max_len");
    }
    if (ids.size() < rows) throw ShapeError("fewer token ids than rows");
    for (std::size_t i = 0; i < rows; ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= shape_.vocab_size) {
            throw ShapeError("token id out of vocabulary at position " + std::to_string(i));
        }
    }
}

void DualHeadModel::run_forward(std::span<const std::int32_t> ids, std::size_t attention_len,
                                std::size_t rows, Cache& c) const {
    check_inputs(ids, attention_len, rows);
    const double* p = params_.data();
    const std::size_t R = rows;
    const std::size_t K = attention_len;
    const std::size_t d = shape_.hidden;
    const std::size_t f = shape_.ffn;
    const std::size_t H = shape_.heads;
    const std::size_t dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    c.rows = R;
    c.keys = K;

    std::vector<double> x0(R * d);
    for (std::size_t r = 0; r < R; ++r) {
        const double* te = p + layout_.tok_emb + static_cast<std::size_t>(ids[r]) * d;
        const double* pe = p + layout_.pos_emb + r * d;
        for (std::size_t j = 0; j < d; ++j) x0[r * d + j] = te[j] + pe[j];
    }
    std::vector<double> x(R * d);
    layer_norm(x0.data(), R, d, p + layout_.emb_ln_g, p + layout_.emb_ln_b, x.data(), c.emb_ln);

    c.layers.assign(shape_.layers, LayerCache{});
    std::vector<double> qh(R * dh), kh(K * dh), vh(K * dh), ctxh(R * dh), tmp(R * d);
    for (std::size_t li = 0; li < shape_.layers; ++li) {
        const LayerOffsets& o = layout_.layers[li];
        LayerCache& L = c.layers[li];
        L.x_in = x;
        L.q.resize(R * d);
        L.k.resize(K * d);
        L.v.resize(K * d);
        mm(x.data(), R, d, p + o.wq, d, L.q.data(), false);
        add_bias(R, d, p + o.bq, L.q.data());
        mm(x.data(), K, d, p + o.wk, d, L.k.data(), false);
        add_bias(K, d, p + o.bk, L.k.data());
        mm(x.data(), K, d, p + o.wv, d, L.v.data(), false);
        add_bias(K, d, p + o.bv, L.v.data());

        L.ctx.assign(R * d, 0.0);
        L.probs.assign(H, {});
        for (std::size_t h = 0; h < H; ++h) {
            take_cols(L.q.data(), R, d, h * dh, dh, qh.data());
            take_cols(L.k.data(), K, d, h * dh, dh, kh.data());
            take_cols(L.v.data(), K, d, h * dh, dh, vh.data());
            std::vector<double>& P = L.probs[h];
            P.resize(R * K);
            mm_nt(qh.data(), R, dh, kh.data(), K, P.data(), false);
            for (std::size_t r = 0; r < R; ++r) {
                double* row = P.data() + r * K;
                double m = -INFINITY;
                for (std::size_t j = 0; j < K; ++j) {
                    row[j] *= scale;
                    m = std::max(m, row[j]);
                }
                double z = 0.0;
                for (std::size_t j = 0; j < K; ++j) {
                    row[j] = std::exp(row[j] - m);
                    z += row[j];
                }
                for (std::size_t j = 0; j < K; ++j) row[j] /= z;
            }
            mm(P.data(), R, K, vh.data(), dh, ctxh.data(), false);
            put_cols(ctxh.data(), R, d, h * dh, dh, L.ctx.data());
        }

        // h1 = LN1(x + ctx Wo + bo)
        mm(L.ctx.data(), R, d, p + o.wo, d, tmp.data(), false);
        add_bias(R, d, p + o.bo, tmp.data());
        for (std::size_t i = 0; i < R * d; ++i) tmp[i] += x[i];
        L.h1.resize(R * d);
        layer_norm(tmp.data(), R, d, p + o.ln1_g, p + o.ln1_b, L.h1.data(), L.ln1);

        // x = LN2(h1 + GELU(h1 W1 + b1) W2 + b2)
        L.u.resize(R * f);
        L.g.resize(R * f);
        mm(L.h1.data(), R, d, p + o.w1, f, L.u.data(), false);
        add_bias(R, f, p + o.b1, L.u.data());
        for (std::size_t i = 0; i < R * f; ++i) L.g[i] = gelu(L.u[i]);
        mm(L.g.data(), R, f, p + o.w2, d, tmp.data(), false);
        add_bias(R, d, p + o.b2, tmp.data());
        for (std::size_t i = 0; i < R * d; ++i) tmp[i] += L.h1[i];
        layer_norm(tmp.data(), R, d, p + o.ln2_g, p + o.ln2_b, x.data(), L.ln2);
    }
    c.out = std::move(x);

    const double* first = c.out.data();
    double y = p[layout_.reg_b];
    for (std::size_t j = 0; j < d; ++j) y += first[j] * p[layout_.reg_w + j];
    c.y_reg_hat = y;

    c.token_logits.resize(R * 2);
    mm(c.out.data(), R, d, p + layout_.tok_w, 2, c.token_logits.data(), false);
    add_bias(R, 2, p + layout_.tok_b, c.token_logits.data());

    for (std::size_t k = 0; k < 2; ++k) {
        double s = p[layout_.seq_b + k];
        for (std::size_t j = 0; j < d; ++j) s += first[j] * p[layout_.seq_w + j * 2 + k];
        c.seq_logits[k] = s;
    }
}

DualHeadOutput DualHeadModel::forward(std::span<const std::int32_t> ids, std::size_t attention_len,
                                      std::size_t rows) const {
    Cache c;
    run_forward(ids, attention_len, rows, c);
    DualHeadOutput out;
    out.y_reg_hat = c.y_reg_hat;
    out.token_logits = std::move(c.token_logits);
    out.sequence_logits = c.seq_logits;
    out.attention_len = attention_len;
    return out;
}

std::size_t DualHeadModel::rows_for(const TrainingExample& example,
                                    const LossOptions& options) const {
    const bool token_loss = options.mode == TrainMode::kDual || options.mode == TrainMode::kTokenOnly;
    return options.include_padding && token_loss ? shape_.max_len : example.attention_len;
}

LossParts DualHeadModel::evaluate_loss(const Cache& c, const TrainingExample& example,
                                       const LossOptions& options, double* d_reg,
                                       std::vector<double>* d_token,
                                       std::array<double, 2>* d_seq) const {
    LossParts parts;
    const bool use_reg = options.mode == TrainMode::kDual || options.mode == TrainMode::kRegressionOnly;
    const bool use_tok = options.mode == TrainMode::kDual || options.mode == TrainMode::kTokenOnly;
    if (!std::isfinite(c.y_reg_hat)) throw NumericalError("non-finite regression output");
    if (use_reg) {
        const double diff = c.y_reg_hat - example.y_reg;
        parts.mse = diff * diff;
        if (d_reg != nullptr) *d_reg = 2.0 * diff;
    }
    if (use_tok) {
        if (example.labels.size() < c.rows) throw ShapeError("token labels shorter than rows");
        if (d_token != nullptr) d_token->assign(c.rows * 2, 0.0);
        for (std::size_t i = 0; i < c.rows; ++i) {
            const int t = example.labels[i] ? 1 : 0;
            parts.ce += two_class_ce(c.token_logits.data() + 2 * i, t,
                                     options.class_weights[static_cast<std::size_t>(t)],
                                     d_token != nullptr ? d_token->data() + 2 * i : nullptr);
        }
    }
    if (options.mode == TrainMode::kBinary) {
        const int t = example.polar_class ? 1 : 0;
        std::array<double, 2> g{0.0, 0.0};
        parts.ce = two_class_ce(c.seq_logits.data(), t, 1.0, g.data());
        if (d_seq != nullptr) *d_seq = g;
    }
    parts.total = parts.mse + parts.ce;
    if (!std::isfinite(parts.total)) throw NumericalError("non-finite loss");
    return parts;
}

LossParts DualHeadModel::loss(const TrainingExample& example, const LossOptions& options) const {
    Cache c;
    run_forward(example.ids, example.attention_len, rows_for(example, options), c);
    return evaluate_loss(c, example, options, nullptr, nullptr, nullptr);
}

LossParts DualHeadModel::loss_and_gradient(const TrainingExample& example,
                                           const LossOptions& options,
                                           std::span<double> grad) const {
    if (grad.size() != params_.size()) throw ShapeError("gradient buffer has the wrong size");
    Cache c;
    run_forward(example.ids, example.attention_len, rows_for(example, options), c);
    double d_reg = 0.0;
    std::vector<double> d_token;
    std::array<double, 2> d_seq{0.0, 0.0};
    const LossParts parts = evaluate_loss(c, example, options, &d_reg, &d_token, &d_seq);
    run_backward(c, example.ids, d_reg, d_token, d_seq, grad);
    return parts;
}

void DualHeadModel::run_backward(const Cache& c, std::span<const std::int32_t> ids, double d_reg,
                                 std::span<const double> d_token,
                                 const std::array<double, 2>& d_seq,
                                 std::span<double> grad) const {
    const double* p = params_.data();
    double* gp = grad.data();
    const std::size_t R = c.rows;
    const std::size_t K = c.keys;
    const std::size_t d = shape_.hidden;
    const std::size_t f = shape_.ffn;
    const std::size_t H = shape_.heads;
    const std::size_t dh = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<double> dx(R * d, 0.0);
    const double* first = c.out.data();
    for (std::size_t j = 0; j < d; ++j) {
        dx[j] += d_reg * p[layout_.reg_w + j];
        gp[layout_.reg_w + j] += d_reg * first[j];
    }
    gp[layout_.reg_b] += d_reg;

    if (!d_token.empty()) {
        mm_nt(d_token.data(), R, 2, p + layout_.tok_w, d, dx.data(), true);
        mm_tn(c.out.data(), R, d, d_token.data(), 2, gp + layout_.tok_w, true);
        add_col_sums(R, 2, d_token.data(), gp + layout_.tok_b);
    }

    if (d_seq[0] != 0.0 || d_seq[1] != 0.0) {
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = 0; k < 2; ++k) {
                dx[j] += d_seq[k] * p[layout_.seq_w + j * 2 + k];
                gp[layout_.seq_w + j * 2 + k] += d_seq[k] * first[j];
            }
        }
        gp[layout_.seq_b] += d_seq[0];
        gp[layout_.seq_b + 1] += d_seq[1];
    }

    std::vector<double> dz(R * d), dh1(R * d), dg(R * f), dctx(R * d);
    std::vector<double> dq(R * d), dk(K * d), dv(K * d);
    std::vector<double> qh(R * dh), kh(K * dh), vh(K * dh), dctxh(R * dh);
    std::vector<double> dP(R * K), dqh(R * dh), dkh(K * dh), dvh(K * dh);
    for (std::size_t li = shape_.layers; li-- > 0;) {
        const LayerOffsets& o = layout_.layers[li];
        const LayerCache& L = c.layers[li];

        layer_norm_backward(L.ln2, R, d, p + o.ln2_g, dx.data(), dz.data(), gp + o.ln2_g,
                            gp + o.ln2_b);
        // dz flows to both the FFN output and the h1 residual.
        dh1 = dz;
        mm_tn(L.g.data(), R, f, dz.data(), d, gp + o.w2, true);
        add_col_sums(R, d, dz.data(), gp + o.b2);
        mm_nt(dz.data(), R, d, p + o.w2, f, dg.data(), false);
        for (std::size_t i = 0; i < R * f; ++i) dg[i] *= gelu_grad(L.u[i]);
        mm_tn(L.h1.data(), R, d, dg.data(), f, gp + o.w1, true);
        add_col_sums(R, f, dg.data(), gp + o.b1);
        mm_nt(dg.data(), R, f, p + o.w1, d, dh1.data(), true);

        layer_norm_backward(L.ln1, R, d, p + o.ln1_g, dh1.data(), dz.data(), gp + o.ln1_g,
                            gp + o.ln1_b);
        // dz now flows to the layer input residual and the attention output.
        dx = dz;
        mm_tn(L.ctx.data(), R, d, dz.data(), d, gp + o.wo, true);
        add_col_sums(R, d, dz.data(), gp + o.bo);
        mm_nt(dz.data(), R, d, p + o.wo, d, dctx.data(), false);

        for (std::size_t h = 0; h < H; ++h) {
            const std::vector<double>& P = L.probs[h];
            take_cols(L.q.data(), R, d, h * dh, dh, qh.data());
            take_cols(L.k.data(), K, d, h * dh, dh, kh.data());
            take_cols(L.v.data(), K, d, h * dh, dh, vh.data());
            take_cols(dctx.data(), R, d, h * dh, dh, dctxh.data());
            mm_nt(dctxh.data(), R, dh, vh.data(), K, dP.data(), false);
            mm_tn(P.data(), R, K, dctxh.data(), dh, dvh.data(), false);
            for (std::size_t r = 0; r < R; ++r) {
                const double* pr = P.data() + r * K;
                double* dr = dP.data() + r * K;
                double s = 0.0;
                for (std::size_t j = 0; j < K; ++j) s += dr[j] * pr[j];
                for (std::size_t j = 0; j < K; ++j) dr[j] = pr[j] * (dr[j] - s) * scale;
            }
            mm(dP.data(), R, K, kh.data(), dh, dqh.data(), false);
            mm_tn(dP.data(), R, K, qh.data(), dh, dkh.data(), false);
            put_cols(dqh.data(), R, d, h * dh, dh, dq.data());
            put_cols(dkh.data(), K, d, h * dh, dh, dk.data());
            put_cols(dvh.data(), K, d, h * dh, dh, dv.data());
        }

        mm_tn(L.x_in.data(), R, d, dq.data(), d, gp + o.wq, true);
        add_col_sums(R, d, dq.data(), gp + o.bq);
        mm_nt(dq.data(), R, d, p + o.wq, d, dx.data(), true);
        mm_tn(L.x_in.data(), K, d, dk.data(), d, gp + o.wk, true);
        add_col_sums(K, d, dk.data(), gp + o.bk);
        mm_nt(dk.data(), K, d, p + o.wk, d, dx.data(), true);
        mm_tn(L.x_in.data(), K, d, dv.data(), d, gp + o.wv, true);
        add_col_sums(K, d, dv.data(), gp + o.bv);
        mm_nt(dv.data(), K, d, p + o.wv, d, dx.data(), true);
    }

    layer_norm_backward(c.emb_ln, R, d, p + layout_.emb_ln_g, dx.data(), dz.data(),
                        gp + layout_.emb_ln_g, gp + layout_.emb_ln_b);
    for (std::size_t r = 0; r < R; ++r) {
        double* gt = gp + layout_.tok_emb + static_cast<std::size_t>(ids[r]) * d;
        double* gpos = gp + layout_.pos_emb + r * d;
        const double* dr = dz.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) {
            gt[j] += dr[j];
            gpos[j] += dr[j];
        }
    }
}

}  // namespace involve::detector
