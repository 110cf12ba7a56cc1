#include "facecorr/network.hpp"

#include "facecorr/error.hpp"
#include "facecorr/rng.hpp"

#include <cmath>

namespace facecorr {

void Dense::init(int in, int out, double limit, Rng& rng) {
    w = Tensor(in, out);
    b = Tensor(1, out);
    for (auto& v : w.data) v = rng.uniform(-limit, limit);
    gw.resize_like(w);
    gb.resize_like(b);
}

int Dense::forward(Tape& tape, int x) const {
    const int wx = tape.matmul(x, tape.leaf(&w, const_cast<Tensor*>(&gw)));
    return tape.add_rowvec(wx, tape.leaf(&b, const_cast<Tensor*>(&gb)));
}

EncoderNet::EncoderNet(const ArchConfig& cfg, Rng& rng) {
    require_data(!cfg.encoder_widths.empty(), "encoder needs at least one layer");
    int in = 3;
    trunk.resize(cfg.encoder_widths.size());
    for (size_t i = 0; i < cfg.encoder_widths.size(); ++i) {
        const int out = cfg.encoder_widths[i];
        trunk[i].init(in, out, std::sqrt(6.0 / in), rng);
        in = out;
    }
    head_id.init(in, cfg.latent_id, std::sqrt(6.0 / (in + cfg.latent_id)), rng);
    head_exp.init(in, cfg.latent_exp, std::sqrt(6.0 / (in + cfg.latent_exp)), rng);
}

EncoderNet::Out EncoderNet::forward(Tape& tape, int points_node) const {
    int x = points_node;
    for (const auto& layer : trunk) x = tape.relu(layer.forward(tape, x));
    Out out;
    out.pooled = tape.max_rows(x);
    out.f_id = head_id.forward(tape, out.pooled);
    out.f_exp = head_exp.forward(tape, out.pooled);
    return out;
}

DecoderNet::DecoderNet(int latent, int hidden_width, int out_vertices, Rng& rng,
                       const std::vector<Vec3>* bias_vertices) {
    hidden.init(latent, hidden_width, std::sqrt(6.0 / latent), rng);
    // Small output weights keep the initial shape close to the output bias.
    out.init(hidden_width, out_vertices * 3, 0.1 * std::sqrt(6.0 / (hidden_width + out_vertices * 3)), rng);
    if (bias_vertices) {
        require_data(static_cast<int>(bias_vertices->size()) == out_vertices,
                     "decoder bias vertex count mismatch");
        for (int i = 0; i < out_vertices; ++i)
            for (int c = 0; c < 3; ++c) out.b.at(0, 3 * i + c) = (*bias_vertices)[i][c];
    }
}

int DecoderNet::forward(Tape& tape, int code_node) const {
    const int h = tape.relu(hidden.forward(tape, code_node));
    const int flat = out.forward(tape, h);
    return tape.reshape(flat, out.b.size() / 3, 3);
}

ShapeModel::ShapeModel(const ArchConfig& cfg, uint64_t seed, const std::vector<Vec3>* template_vertices)
    : cfg_(cfg) {
    Rng rng(derive_seed(seed, "model-init"));
    encoder = EncoderNet(cfg, rng);
    dec_id = DecoderNet(cfg.latent_id, cfg.decoder_hidden, cfg.points, rng, template_vertices);
    dec_exp = DecoderNet(cfg.latent_exp, cfg.decoder_hidden, cfg.points, rng, nullptr);
}

ShapeModel::Forward ShapeModel::forward(Tape& tape, const PointCloud& cloud, bool identity_only) const {
    require_data(cloud.size() >= 1, "encoder input cloud is empty");
    Tensor input = cloud_to_tensor(cloud);
    require_data(input.all_finite(), "encoder input contains non-finite coordinates");

    Forward fwd;
    fwd.input = tape.input(std::move(input));
    const auto enc = encoder.forward(tape, fwd.input);
    fwd.f_id = enc.f_id;
    fwd.f_exp = enc.f_exp;
    fwd.s_id = dec_id.forward(tape, fwd.f_id);
    if (identity_only) {
        fwd.s_hat = fwd.s_id;
    } else {
        fwd.ds_exp = dec_exp.forward(tape, fwd.f_exp);
        fwd.s_hat = tape.add(fwd.s_id, fwd.ds_exp);
    }
    return fwd;
}

LatentCode ShapeModel::encode(const PointCloud& cloud) const {
    Tape tape;
    require_data(cloud.size() >= 1, "encoder input cloud is empty");
    Tensor input = cloud_to_tensor(cloud);
    require_data(input.all_finite(), "encoder input contains non-finite coordinates");
    const int node = tape.input(std::move(input));
    const auto enc = encoder.forward(tape, node);
    LatentCode code;
    code.id = tape.value(enc.f_id).row(0).transpose();
    code.exp = tape.value(enc.f_exp).row(0).transpose();
    return code;
}

DecodeResult ShapeModel::decode(const LatentCode& code) const {
    require_data(code.id.size() == cfg_.latent_id,
                 "identity code has dimension " + std::to_string(code.id.size()) + ", expected " +
                     std::to_string(cfg_.latent_id));
    require_data(code.exp.size() == cfg_.latent_exp,
                 "expression code has dimension " + std::to_string(code.exp.size()) + ", expected " +
                     std::to_string(cfg_.latent_exp));

    Tape tape;
    Tensor id_in(1, cfg_.latent_id), exp_in(1, cfg_.latent_exp);
    for (int i = 0; i < cfg_.latent_id; ++i) id_in.at(0, i) = code.id(i);
    for (int i = 0; i < cfg_.latent_exp; ++i) exp_in.at(0, i) = code.exp(i);
    const int s_id = dec_id.forward(tape, tape.input(std::move(id_in)));
    const int ds_exp = dec_exp.forward(tape, tape.input(std::move(exp_in)));
    const int s_hat = tape.add(s_id, ds_exp);

    DecodeResult res;
    res.s_id = tensor_to_vertices(tape.value_tensor(s_id));
    res.ds_exp = tensor_to_vertices(tape.value_tensor(ds_exp));
    res.s_hat = tensor_to_vertices(tape.value_tensor(s_hat));
    return res;
}

namespace {

void collect_dense(std::vector<ParamRef>& out, const std::string& name, Dense& d) {
    out.push_back({name + ".w", &d.w, &d.gw});
    out.push_back({name + ".b", &d.b, &d.gb});
}

}  // namespace

std::vector<ParamRef> ShapeModel::parameters() {
    std::vector<ParamRef> out;
    for (size_t i = 0; i < encoder.trunk.size(); ++i)
        collect_dense(out, "encoder.trunk" + std::to_string(i), encoder.trunk[i]);
    collect_dense(out, "encoder.head_id", encoder.head_id);
    collect_dense(out, "encoder.head_exp", encoder.head_exp);
    collect_dense(out, "dec_id.hidden", dec_id.hidden);
    collect_dense(out, "dec_id.out", dec_id.out);
    collect_dense(out, "dec_exp.hidden", dec_exp.hidden);
    collect_dense(out, "dec_exp.out", dec_exp.out);
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ShapeModel::parameter_values() const {
    auto params = const_cast<ShapeModel*>(this)->parameters();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.name, p.value);
    return out;
}

void ShapeModel::zero_grads() {
    for (auto& p : parameters()) p.grad->set_zero();
}

Adam::Adam(const std::vector<ParamRef>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        Tensor m, v;
        m.resize_like(*p.value);
        v.resize_like(*p.value);
        m_.push_back(std::move(m));
        v_.push_back(std::move(v));
    }
}

void Adam::step(const std::vector<ParamRef>& params, double lr, const std::vector<bool>* mask) {
    require(params.size() == m_.size(), ErrorCode::Internal, "Adam parameter list changed size");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        Tensor& value = *params[i].value;
        const Tensor& grad = *params[i].grad;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (int k = 0; k < value.size(); ++k) {
            const double g = grad.data[k];
            m.data[k] = beta1_ * m.data[k] + (1.0 - beta1_) * g;
            v.data[k] = beta2_ * v.data[k] + (1.0 - beta2_) * g * g;
            const double mhat = m.data[k] / bc1;
            const double vhat = v.data[k] / bc2;
            value.data[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

Tensor cloud_to_tensor(const PointCloud& cloud) {
    Tensor t(cloud.size(), 3);
    for (int i = 0; i < cloud.size(); ++i)
        for (int c = 0; c < 3; ++c) t.at(i, c) = cloud.points[i][c];
    return t;
}

Tensor vertices_to_tensor(const std::vector<Vec3>& vertices) {
    Tensor t(static_cast<int>(vertices.size()), 3);
    for (size_t i = 0; i < vertices.size(); ++i)
        for (int c = 0; c < 3; ++c) t.at(static_cast<int>(i), c) = vertices[i][c];
    return t;
}

std::vector<Vec3> tensor_to_vertices(const Tensor& t) {
    require(t.cols == 3, ErrorCode::Internal, "vertex tensor must have 3 columns");
    std::vector<Vec3> out(t.rows);
    for (int i = 0; i < t.rows; ++i) out[i] = Vec3(t.at(i, 0), t.at(i, 1), t.at(i, 2));
    return out;
}

}  // namespace facecorr
