#include "facecorr/autodiff.hpp"

#include "facecorr/error.hpp"

#include <string>

namespace facecorr {

namespace {
void hash_mix(uint64_t& h, uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}
}  // namespace

int Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_id(int id, const char* what) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
        fail(ErrorCode::Internal, std::string(what) + ": node id " + std::to_string(id) + " is not on the tape");
}

ConstRowMap Tape::node_value(const Node& n) const {
    const Tensor& t = n.ext_value ? *n.ext_value : n.value;
    return t.map();
}

const Tensor& Tape::node_value_tensor(const Node& n) const { return n.ext_value ? *n.ext_value : n.value; }

int Tape::input(Tensor value) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

int Tape::leaf(const Tensor* value, Tensor* grad) {
    require(value != nullptr && !value->empty(), ErrorCode::Internal, "leaf requires a non-empty value tensor");
    if (grad) require(grad->same_shape(*value), ErrorCode::Internal, "leaf gradient shape mismatch");
    Node n;
    n.op = Op::Leaf;
    n.ext_value = value;
    n.ext_grad = grad;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    check_id(a, "matmul");
    check_id(b, "matmul");
    const auto av = node_value(nodes_[a]);
    const auto bv = node_value(nodes_[b]);
    require(av.cols() == bv.rows(), ErrorCode::Internal,
            "matmul shape mismatch: " + std::to_string(av.cols()) + " vs " + std::to_string(bv.rows()));
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = Tensor(static_cast<int>(av.rows()), static_cast<int>(bv.cols()));
    // Row-by-row products keep every output row's rounding independent of the
    // other rows, which makes the point-set encoder exactly permutation
    // invariant (a blocked GEMM would tile rows together and break that).
    auto out = n.value.map();
    for (Eigen::Index r = 0; r < av.rows(); ++r) out.row(r).noalias() = av.row(r) * bv;
    return push(std::move(n));
}

int Tape::add_rowvec(int x, int bias) {
    check_id(x, "add_rowvec");
    check_id(bias, "add_rowvec");
    const auto xv = node_value(nodes_[x]);
    const auto bv = node_value(nodes_[bias]);
    require(bv.rows() == 1 && bv.cols() == xv.cols(), ErrorCode::Internal, "add_rowvec bias shape mismatch");
    Node n;
    n.op = Op::AddRowVec;
    n.a = x;
    n.b = bias;
    n.value = Tensor(static_cast<int>(xv.rows()), static_cast<int>(xv.cols()));
    n.value.map() = xv.rowwise() + bv.row(0);
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    check_id(a, "add");
    check_id(b, "add");
    const auto av = node_value(nodes_[a]);
    const auto bv = node_value(nodes_[b]);
    require(av.rows() == bv.rows() && av.cols() == bv.cols(), ErrorCode::Internal, "add shape mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = Tensor(static_cast<int>(av.rows()), static_cast<int>(av.cols()));
    n.value.map() = av + bv;
    return push(std::move(n));
}

int Tape::relu(int x) {
    check_id(x, "relu");
    const auto xv = node_value(nodes_[x]);
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.value = Tensor(static_cast<int>(xv.rows()), static_cast<int>(xv.cols()));
    n.value.map() = xv.cwiseMax(0.0);
    return push(std::move(n));
}

int Tape::max_rows(int x) {
    check_id(x, "max_rows");
    const auto xv = node_value(nodes_[x]);
    require(xv.rows() >= 1, ErrorCode::Internal, "max_rows requires at least one row");
    Node n;
    n.op = Op::MaxRows;
    n.a = x;
    const int cols = static_cast<int>(xv.cols());
    n.value = Tensor(1, cols);
    n.argmax.assign(cols, 0);
    for (int c = 0; c < cols; ++c) {
        double best = xv(0, c);
        int best_row = 0;
        for (int r = 1; r < xv.rows(); ++r) {
            if (xv(r, c) > best) {  // strict: ties stay at the lowest row
                best = xv(r, c);
                best_row = r;
            }
        }
        n.value.at(0, c) = best;
        n.argmax[c] = best_row;
    }
    return push(std::move(n));
}

int Tape::reshape(int x, int rows, int cols) {
    check_id(x, "reshape");
    const Tensor& xv = node_value_tensor(nodes_[x]);
    require(rows * cols == xv.size(), ErrorCode::Internal, "reshape size mismatch");
    Node n;
    n.op = Op::Reshape;
    n.a = x;
    n.value = xv;  // row-major data is identical; only the shape changes
    n.value.rows = rows;
    n.value.cols = cols;
    return push(std::move(n));
}

int Tape::sum(int x) {
    check_id(x, "sum");
    Node n;
    n.op = Op::Sum;
    n.a = x;
    n.value = Tensor(1, 1);
    n.value.at(0, 0) = node_value(nodes_[x]).sum();
    return push(std::move(n));
}

ConstRowMap Tape::value(int id) const {
    check_id(id, "value");
    return node_value(nodes_[id]);
}

const Tensor& Tape::value_tensor(int id) const {
    check_id(id, "value");
    return node_value_tensor(nodes_[id]);
}

const Tensor& Tape::grad(int id) const {
    check_id(id, "grad");
    require(!nodes_[id].grad.empty(), ErrorCode::Internal, "gradient not populated; run backward first");
    return nodes_[id].grad;
}

void Tape::backward_scalar(int output) {
    Tensor seed(1, 1);
    seed.at(0, 0) = 1.0;
    backward(output, seed);
}

void Tape::backward(int output, const Tensor& seed) {
    require(!nodes_.empty(), ErrorCode::Internal, "backward called before any forward computation");
    check_id(output, "backward");
    require(seed.same_shape(node_value_tensor(nodes_[output])), ErrorCode::Internal,
            "backward seed shape does not match the output");

    auto ensure_grad = [&](int id) -> Tensor& {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad.resize_like(node_value_tensor(n));
        return n.grad;
    };

    ensure_grad(output).map() += seed.map();

    for (int id = output; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) continue;
        const auto g = n.grad.map();
        switch (n.op) {
            case Op::Input:
                break;
            case Op::Leaf:
                if (n.ext_grad) n.ext_grad->map() += g;
                break;
            case Op::MatMul: {
                const auto av = node_value(nodes_[n.a]);
                const auto bv = node_value(nodes_[n.b]);
                ensure_grad(n.a).map().noalias() += g * bv.transpose();
                ensure_grad(n.b).map().noalias() += av.transpose() * g;
                break;
            }
            case Op::AddRowVec:
                ensure_grad(n.a).map() += g;
                ensure_grad(n.b).map() += g.colwise().sum();
                break;
            case Op::Add:
                ensure_grad(n.a).map() += g;
                ensure_grad(n.b).map() += g;
                break;
            case Op::Relu: {
                auto ga = ensure_grad(n.a).map();
                const auto v = n.value.map();
                ga.array() += g.array() * (v.array() > 0.0).cast<double>();
                break;
            }
            case Op::MaxRows: {
                Tensor& ga = ensure_grad(n.a);
                for (int c = 0; c < n.value.cols; ++c) ga.at(n.argmax[c], c) += n.grad.at(0, c);
                break;
            }
            case Op::Reshape: {
                Tensor& ga = ensure_grad(n.a);
                for (int i = 0; i < n.grad.size(); ++i) ga.data[i] += n.grad.data[i];
                break;
            }
            case Op::Sum:
                ensure_grad(n.a).map().array() += n.grad.at(0, 0);
                break;
        }
    }
}

uint64_t Tape::routing_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& n : nodes_) {
        if (n.op == Op::Relu) {
            uint64_t word = 0;
            int bits = 0;
            for (double v : n.value.data) {
                word = (word << 1) | (v > 0.0 ? 1u : 0u);
                if (++bits == 64) {
                    hash_mix(h, word);
                    word = 0;
                    bits = 0;
                }
            }
            if (bits > 0) hash_mix(h, word);
        } else if (n.op == Op::MaxRows) {
            for (int r : n.argmax) hash_mix(h, static_cast<uint64_t>(r));
        }
    }
    return h;
}

void Tape::clear() { nodes_.clear(); }

}  // namespace facecorr
