#pragma once

#include "facecorr/autodiff.hpp"
#include "facecorr/geometry.hpp"
#include "facecorr/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace facecorr {

struct ArchConfig {
    int points = 642;  // decoder output vertex count
    int latent_id = 64;
    int latent_exp = 64;
    std::vector<int> encoder_widths{64, 64, 128, 1024};
    int decoder_hidden = 1024;

    bool operator==(const ArchConfig&) const = default;
};

struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

/// One affine layer y = x W + b with its gradient buffers.
struct Dense {
    Tensor w, b, gw, gb;

    void init(int in, int out, double limit, class Rng& rng);
    int forward(Tape& tape, int x) const;
};

struct LatentCode {
    Eigen::VectorXd id;
    Eigen::VectorXd exp;
};

/// Shared per-point MLP -> column max pool -> two parallel affine heads.
/// The pooled feature makes the output exactly permutation invariant.
class EncoderNet {
public:
    EncoderNet() = default;
    EncoderNet(const ArchConfig& cfg, Rng& rng);

    struct Out {
        int pooled = -1;
        int f_id = -1;
        int f_exp = -1;
    };
    Out forward(Tape& tape, int points_node) const;

    std::vector<Dense> trunk;
    Dense head_id, head_exp;
};

/// Two-layer MLP: latent -> hidden (ReLU) -> vertices, reshaped to n x 3.
class DecoderNet {
public:
    DecoderNet() = default;
    DecoderNet(int latent, int hidden, int out_vertices, Rng& rng, const std::vector<Vec3>* bias_vertices);

    int forward(Tape& tape, int code_node) const;
    int out_vertices() const { return out.b.size() / 3; }

    Dense hidden, out;
};

struct DecodeResult {
    std::vector<Vec3> s_id;
    std::vector<Vec3> ds_exp;
    std::vector<Vec3> s_hat;
};

/// Full autoencoder: point-set encoder with identity/expression heads and the
/// two shape decoders composed as s_hat = s_id + ds_exp.
class ShapeModel {
public:
    ShapeModel() = default;
    /// template_vertices, when given, seed the identity decoder's output bias
    /// so the untrained model emits the template.
    ShapeModel(const ArchConfig& cfg, uint64_t seed, const std::vector<Vec3>* template_vertices = nullptr);

    const ArchConfig& arch() const { return cfg_; }

    struct Forward {
        int input = -1;
        int f_id = -1;
        int f_exp = -1;
        int s_id = -1;
        int ds_exp = -1;  // -1 in identity-only mode
        int s_hat = -1;
    };
    /// identity_only skips the expression decoder (s_hat = s_id).
    /// want_input_grad exposes dL/d(input points) via tape.grad(fwd.input).
    Forward forward(Tape& tape, const PointCloud& cloud, bool identity_only = false) const;

    LatentCode encode(const PointCloud& cloud) const;
    DecodeResult decode(const LatentCode& code) const;

    /// All parameters in the declared checkpoint order.
    std::vector<ParamRef> parameters();
    std::vector<std::pair<std::string, const Tensor*>> parameter_values() const;
    void zero_grads();

    EncoderNet encoder;
    DecoderNet dec_id, dec_exp;

private:
    ArchConfig cfg_;
};

/// Bias-corrected Adam over a fixed parameter list. Masked-out parameters are
/// untouched, moments included.
class Adam {
public:
    Adam() = default;
    explicit Adam(const std::vector<ParamRef>& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(const std::vector<ParamRef>& params, double lr, const std::vector<bool>* mask = nullptr);
    int steps_taken() const { return t_; }

private:
    std::vector<Tensor> m_, v_;
    int t_ = 0;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

/// Tensor helpers shared with losses/training.
Tensor cloud_to_tensor(const PointCloud& cloud);
Tensor vertices_to_tensor(const std::vector<Vec3>& vertices);
std::vector<Vec3> tensor_to_vertices(const Tensor& t);

}  // namespace facecorr
