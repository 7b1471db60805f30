#include "dpss/diffgraph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dpss::diffgraph {

const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::constant: return "constant";
    case Op::affine: return "affine";
    case Op::causal_conv: return "causal_conv";
    case Op::gru: return "gru";
    case Op::relu: return "relu";
    case Op::tanh: return "tanh";
    case Op::softplus: return "softplus";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::add: return "add";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::add_scalar: return "add_scalar";
    case Op::concat: return "concat";
    case Op::slice_cols: return "slice_cols";
    case Op::logistic_log_density: return "logistic_log_density";
    case Op::reduce_sum: return "reduce_sum";
  }
  return nullptr;
}

namespace {

std::size_t arity(Op op, std::size_t given) {
  switch (op) {
    case Op::input:
    case Op::constant: return 0;
    case Op::affine: return given == 2 ? 2 : 3;
    case Op::causal_conv: return 4;
    case Op::gru: return 6;
    case Op::relu:
    case Op::tanh:
    case Op::softplus:
    case Op::sin:
    case Op::cos:
    case Op::scale:
    case Op::add_scalar:
    case Op::slice_cols:
    case Op::reduce_sum: return 1;
    case Op::add:
    case Op::mul:
    case Op::concat: return 2;
    case Op::logistic_log_density: return 3;
  }
  throw Error("unknown op code " + std::to_string(static_cast<int>(op)));
}

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return "[" + std::to_string(r) + "," + std::to_string(c) + "]";
}

template <typename T>
std::string shape_of(const Tensor<T>& t) {
  return shape_str(t.rows(), t.cols());
}

[[noreturn]] void shape_error(const Node& n, NodeId id, const std::string& detail) {
  throw Error(std::string("shape mismatch in ") + op_name(n.op) + " node " + std::to_string(id) + ": " +
              detail);
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
class Evaluation {
 public:
  Evaluation(const std::vector<Node>& nodes, const Bindings<T>& inputs)
      : nodes_(nodes), owned_(nodes.size()), val_(nodes.size(), nullptr), aux_(nodes.size()) {
    for (NodeId i = 0; i < nodes.size(); ++i) forward_node(i, inputs);
  }

  const Tensor<T>& value(NodeId id) const { return *val_[id]; }

  // Adjoints of every node that lies on a path from a requested input to the
  // output. Returns the adjoint table indexed by node id.
  std::vector<Tensor<T>> backward(NodeId output, const std::vector<bool>& needs) {
    std::vector<Tensor<T>> adj(nodes_.size());
    adj[output] = Tensor<T>::Ones(1, 1);
    for (NodeId i = output + 1; i-- > 0;) {
      if (!needs[i] || adj[i].size() == 0 || nodes_[i].op == Op::input) continue;
      backward_node(i, adj, needs);
    }
    return adj;
  }

 private:
  const Tensor<T>& arg(NodeId id, std::size_t k) const { return *val_[nodes_[id].args[k]]; }

  Tensor<T>& emit(NodeId id) {
    val_[id] = &owned_[id];
    return owned_[id];
  }

  void forward_node(NodeId id, const Bindings<T>& inputs) {
    const Node& n = nodes_[id];
    switch (n.op) {
      case Op::input: {
        const Tensor<T>* bound = inputs.find(n.name);
        if (!bound) throw Error("missing input '" + n.name + "'");
        if (!bound->allFinite()) throw Error("input '" + n.name + "' has non-finite entries");
        val_[id] = bound;
        return;
      }
      case Op::constant:
        emit(id) = n.value.template cast<T>();
        return;
      case Op::affine: {
        const auto& x = arg(id, 0);
        const auto& w = arg(id, 1);
        if (x.cols() != w.cols()) shape_error(n, id, "x " + shape_of(x) + " vs W " + shape_of(w));
        auto& out = emit(id);
        out.noalias() = x * w.transpose();
        if (n.args.size() == 3) {
          const auto& b = arg(id, 2);
          if (b.rows() != 1 || b.cols() != w.rows()) shape_error(n, id, "bias " + shape_of(b));
          out.rowwise() += b.row(0);
        }
        return;
      }
      case Op::causal_conv: {
        const auto& x = arg(id, 0);
        const auto& hist = arg(id, 1);
        const auto& w = arg(id, 2);
        const auto& b = arg(id, 3);
        const auto k = static_cast<Eigen::Index>(n.begin);
        const Eigen::Index c = x.cols(), frames = x.rows();
        if (hist.rows() != k || hist.cols() != c) shape_error(n, id, "history " + shape_of(hist));
        if (w.cols() != k * c) shape_error(n, id, "W " + shape_of(w) + " for x " + shape_of(x));
        if (b.rows() != 1 || b.cols() != w.rows()) shape_error(n, id, "bias " + shape_of(b));
        aux_[id].resize(1);
        auto& cols = aux_[id][0];
        cols.resize(frames, k * c);
        for (Eigen::Index t = 0; t < frames; ++t) {
          for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::Index src = t - k + j;
            cols.block(t, j * c, 1, c) = src >= 0 ? x.row(src) : hist.row(src + k);
          }
        }
        auto& out = emit(id);
        out.noalias() = cols * w.transpose();
        out.rowwise() += b.row(0);
        return;
      }
      case Op::gru: {
        const auto& x = arg(id, 0);
        const auto& h0 = arg(id, 1);
        const auto& w_ih = arg(id, 2);
        const auto& w_hh = arg(id, 3);
        const auto& b_ih = arg(id, 4);
        const auto& b_hh = arg(id, 5);
        const Eigen::Index h = h0.cols(), frames = x.rows();
        if (h0.rows() != 1) shape_error(n, id, "h0 " + shape_of(h0));
        if (w_ih.rows() != 3 * h || w_ih.cols() != x.cols()) shape_error(n, id, "W_ih " + shape_of(w_ih));
        if (w_hh.rows() != 3 * h || w_hh.cols() != h) shape_error(n, id, "W_hh " + shape_of(w_hh));
        if (b_ih.rows() != 1 || b_ih.cols() != 3 * h) shape_error(n, id, "b_ih " + shape_of(b_ih));
        if (b_hh.rows() != 1 || b_hh.cols() != 3 * h) shape_error(n, id, "b_hh " + shape_of(b_hh));

        aux_[id].resize(4);
        auto& r = aux_[id][0];
        auto& z = aux_[id][1];
        auto& cand = aux_[id][2];
        auto& ghn = aux_[id][3];
        r.resize(frames, h);
        z.resize(frames, h);
        cand.resize(frames, h);
        ghn.resize(frames, h);
        Tensor<T> gx = x * w_ih.transpose();
        gx.rowwise() += b_ih.row(0);

        auto& out = emit(id);
        out.resize(frames, h);
        Eigen::Matrix<T, 1, Eigen::Dynamic> state = h0.row(0);
        Eigen::Matrix<T, 1, Eigen::Dynamic> gh(3 * h);
        for (Eigen::Index t = 0; t < frames; ++t) {
          gh.noalias() = state * w_hh.transpose();
          gh += b_hh.row(0);
          for (Eigen::Index j = 0; j < h; ++j) {
            const T rj = sigmoid(gx(t, j) + gh[j]);
            const T zj = sigmoid(gx(t, h + j) + gh[h + j]);
            const T nj = std::tanh(gx(t, 2 * h + j) + rj * gh[2 * h + j]);
            r(t, j) = rj;
            z(t, j) = zj;
            cand(t, j) = nj;
            ghn(t, j) = gh[2 * h + j];
            state[j] = (T(1) - zj) * nj + zj * state[j];
          }
          out.row(t) = state;
        }
        return;
      }
      case Op::relu:
        emit(id) = arg(id, 0).cwiseMax(T(0));
        return;
      case Op::tanh:
        emit(id) = arg(id, 0).array().tanh().matrix();
        return;
      case Op::softplus:
        emit(id) = arg(id, 0).unaryExpr([](T v) { return softplus(v); });
        return;
      case Op::sin:
        emit(id) = arg(id, 0).array().sin().matrix();
        return;
      case Op::cos:
        emit(id) = arg(id, 0).array().cos().matrix();
        return;
      case Op::add: {
        const auto& a = arg(id, 0);
        const auto& b = arg(id, 1);
        if (a.rows() == b.rows() && a.cols() == b.cols()) {
          emit(id) = a + b;
        } else if (b.rows() == 1 && a.cols() == b.cols()) {
          auto& out = emit(id);
          out = a;
          out.rowwise() += b.row(0);
        } else {
          shape_error(n, id, shape_of(a) + " + " + shape_of(b));
        }
        return;
      }
      case Op::mul: {
        const auto& a = arg(id, 0);
        const auto& b = arg(id, 1);
        if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(n, id, shape_of(a) + " * " + shape_of(b));
        emit(id) = a.cwiseProduct(b);
        return;
      }
      case Op::scale:
        emit(id) = arg(id, 0) * static_cast<T>(n.scalar);
        return;
      case Op::add_scalar:
        emit(id) = (arg(id, 0).array() + static_cast<T>(n.scalar)).matrix();
        return;
      case Op::concat: {
        const auto& a = arg(id, 0);
        const auto& b = arg(id, 1);
        if (a.rows() != b.rows()) shape_error(n, id, shape_of(a) + " | " + shape_of(b));
        auto& out = emit(id);
        out.resize(a.rows(), a.cols() + b.cols());
        out << a, b;
        return;
      }
      case Op::slice_cols: {
        const auto& a = arg(id, 0);
        if (n.end > static_cast<std::size_t>(a.cols()))
          shape_error(n, id, "columns [" + std::to_string(n.begin) + "," + std::to_string(n.end) + ") of " +
                                 shape_of(a));
        emit(id) = a.middleCols(static_cast<Eigen::Index>(n.begin), static_cast<Eigen::Index>(n.end - n.begin));
        return;
      }
      case Op::logistic_log_density: {
        const auto& x = arg(id, 0);
        const auto& mu = arg(id, 1);
        const auto& s = arg(id, 2);
        if (mu.rows() != x.rows() || mu.cols() != x.cols() || s.rows() != x.rows() || s.cols() != x.cols())
          shape_error(n, id, shape_of(x) + ", " + shape_of(mu) + ", " + shape_of(s));
        if (s.size() > 0 && !(s.minCoeff() > T(0))) throw Error("logistic scale must be positive");
        auto& out = emit(id);
        out.resize(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          const T zabs = std::abs((x.data()[i] - mu.data()[i]) / s.data()[i]);
          out.data()[i] = -std::log(s.data()[i]) - zabs - T(2) * std::log1p(std::exp(-zabs));
        }
        return;
      }
      case Op::reduce_sum: {
        auto& out = emit(id);
        out.resize(1, 1);
        out(0, 0) = arg(id, 0).sum();
        return;
      }
    }
    throw Error("unknown op in node " + std::to_string(id));
  }

  void accumulate(std::vector<Tensor<T>>& adj, const std::vector<bool>& needs, NodeId target,
                  const Tensor<T>& grad) {
    if (!needs[target]) return;
    if (adj[target].size() == 0)
      adj[target] = grad;
    else
      adj[target] += grad;
  }

  void backward_node(NodeId id, std::vector<Tensor<T>>& adj, const std::vector<bool>& needs) {
    const Node& n = nodes_[id];
    const Tensor<T>& g = adj[id];
    auto need = [&](std::size_t k) { return needs[n.args[k]]; };
    auto acc = [&](std::size_t k, const Tensor<T>& grad) { accumulate(adj, needs, n.args[k], grad); };

    switch (n.op) {
      case Op::input:
      case Op::constant: return;
      case Op::affine: {
        const auto& x = arg(id, 0);
        const auto& w = arg(id, 1);
        if (need(0)) acc(0, g * w);
        if (need(1)) acc(1, g.transpose() * x);
        if (n.args.size() == 3 && need(2)) acc(2, g.colwise().sum());
        return;
      }
      case Op::causal_conv: {
        const auto& x = arg(id, 0);
        const auto& w = arg(id, 2);
        const auto& cols = aux_[id][0];
        const auto k = static_cast<Eigen::Index>(n.begin);
        const Eigen::Index c = x.cols(), frames = x.rows();
        if (need(0) || need(1)) {
          const Tensor<T> dcols = g * w;
          Tensor<T> dx = Tensor<T>::Zero(frames, c);
          Tensor<T> dhist = Tensor<T>::Zero(k, c);
          for (Eigen::Index t = 0; t < frames; ++t) {
            for (Eigen::Index j = 0; j < k; ++j) {
              const Eigen::Index src = t - k + j;
              if (src >= 0)
                dx.row(src) += dcols.block(t, j * c, 1, c);
              else
                dhist.row(src + k) += dcols.block(t, j * c, 1, c);
            }
          }
          if (need(0)) acc(0, dx);
          if (need(1)) acc(1, dhist);
        }
        if (need(2)) acc(2, g.transpose() * cols);
        if (need(3)) acc(3, g.colwise().sum());
        return;
      }
      case Op::gru: {
        const auto& x = arg(id, 0);
        const auto& h0 = arg(id, 1);
        const auto& w_ih = arg(id, 2);
        const auto& w_hh = arg(id, 3);
        const auto& r = aux_[id][0];
        const auto& z = aux_[id][1];
        const auto& cand = aux_[id][2];
        const auto& ghn = aux_[id][3];
        const auto& hs = *val_[id];
        const Eigen::Index h = h0.cols(), frames = x.rows();

        Tensor<T> dgx(frames, 3 * h), dgh(frames, 3 * h);
        Eigen::Matrix<T, 1, Eigen::Dynamic> carry = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(h);
        Eigen::Matrix<T, 1, Eigen::Dynamic> dh(h);
        for (Eigen::Index t = frames; t-- > 0;) {
          dh = g.row(t) + carry;
          for (Eigen::Index j = 0; j < h; ++j) {
            const T prev = t > 0 ? hs(t - 1, j) : h0(0, j);
            const T zj = z(t, j), rj = r(t, j), nj = cand(t, j);
            const T dz = dh[j] * (prev - nj);
            const T dn = dh[j] * (T(1) - zj);
            const T dan = dn * (T(1) - nj * nj);
            const T dar = dan * ghn(t, j) * rj * (T(1) - rj);
            const T daz = dz * zj * (T(1) - zj);
            dgx(t, j) = dar;
            dgx(t, h + j) = daz;
            dgx(t, 2 * h + j) = dan;
            dgh(t, j) = dar;
            dgh(t, h + j) = daz;
            dgh(t, 2 * h + j) = dan * rj;
            carry[j] = dh[j] * zj;
          }
          carry.noalias() += dgh.row(t) * w_hh;
        }
        if (need(0)) acc(0, dgx * w_ih);
        if (need(1)) acc(1, carry);
        if (need(2)) acc(2, dgx.transpose() * x);
        if (need(3)) {
          Tensor<T> prev(frames, h);
          if (frames > 0) {
            prev.row(0) = h0.row(0);
            prev.bottomRows(frames - 1) = hs.topRows(frames - 1);
          }
          acc(3, dgh.transpose() * prev);
        }
        if (need(4)) acc(4, dgx.colwise().sum());
        if (need(5)) acc(5, dgh.colwise().sum());
        return;
      }
      case Op::relu: {
        const auto& a = arg(id, 0);
        acc(0, g.cwiseProduct(a.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); })));
        return;
      }
      case Op::tanh: {
        const auto& y = *val_[id];
        acc(0, g.cwiseProduct((T(1) - y.array().square()).matrix()));
        return;
      }
      case Op::softplus:
        acc(0, g.cwiseProduct(arg(id, 0).unaryExpr([](T v) { return sigmoid(v); })));
        return;
      case Op::sin:
        acc(0, g.cwiseProduct(arg(id, 0).array().cos().matrix()));
        return;
      case Op::cos:
        acc(0, -g.cwiseProduct(arg(id, 0).array().sin().matrix()));
        return;
      case Op::add: {
        acc(0, g);
        if (need(1)) {
          const auto& a = arg(id, 0);
          const auto& b = arg(id, 1);
          if (b.rows() == a.rows())
            acc(1, g);
          else
            acc(1, g.colwise().sum());
        }
        return;
      }
      case Op::mul:
        if (need(0)) acc(0, g.cwiseProduct(arg(id, 1)));
        if (need(1)) acc(1, g.cwiseProduct(arg(id, 0)));
        return;
      case Op::scale:
        acc(0, g * static_cast<T>(n.scalar));
        return;
      case Op::add_scalar:
        acc(0, g);
        return;
      case Op::concat: {
        const Eigen::Index left = arg(id, 0).cols();
        if (need(0)) acc(0, g.leftCols(left));
        if (need(1)) acc(1, g.rightCols(g.cols() - left));
        return;
      }
      case Op::slice_cols: {
        const auto& a = arg(id, 0);
        Tensor<T> full = Tensor<T>::Zero(a.rows(), a.cols());
        full.middleCols(static_cast<Eigen::Index>(n.begin), g.cols()) = g;
        acc(0, full);
        return;
      }
      case Op::logistic_log_density: {
        const auto& x = arg(id, 0);
        const auto& mu = arg(id, 1);
        const auto& s = arg(id, 2);
        Tensor<T> dx(x.rows(), x.cols()), ds(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          const T si = s.data()[i];
          const T zi = (x.data()[i] - mu.data()[i]) / si;
          const T th = std::tanh(zi / T(2));
          dx.data()[i] = -g.data()[i] * th / si;
          ds.data()[i] = g.data()[i] * (zi * th - T(1)) / si;
        }
        if (need(0)) acc(0, dx);
        if (need(1)) acc(1, -dx);
        if (need(2)) acc(2, ds);
        return;
      }
      case Op::reduce_sum: {
        const auto& a = arg(id, 0);
        acc(0, Tensor<T>::Constant(a.rows(), a.cols(), g(0, 0)));
        return;
      }
    }
  }

  const std::vector<Node>& nodes_;
  std::vector<Tensor<T>> owned_;
  std::vector<const Tensor<T>*> val_;
  std::vector<std::vector<Tensor<T>>> aux_;
};

}  // namespace

NodeId Graph::add(Node node) {
  const std::size_t expected = arity(node.op, node.args.size());
  if (node.args.size() != expected)
    throw Error(std::string(op_name(node.op)) + " expects " + std::to_string(expected) + " arguments, got " +
                std::to_string(node.args.size()));
  for (NodeId a : node.args)
    if (a >= nodes_.size()) throw Error("node argument " + std::to_string(a) + " does not exist");
  if (node.op == Op::input) {
    if (node.name.empty()) throw Error("inputs need a name");
    if (inputs_.count(node.name)) throw Error("duplicate input '" + node.name + "'");
  }
  if (node.op == Op::slice_cols && node.end < node.begin) throw Error("slice_cols with end < begin");
  if (node.op == Op::causal_conv && node.begin == 0) throw Error("causal_conv needs a kernel of at least 1");
  const NodeId id = nodes_.size();
  if (node.op == Op::input) inputs_[node.name] = id;
  nodes_.push_back(std::move(node));
  return id;
}

NodeId Graph::input(const std::string& name) {
  Node n;
  n.op = Op::input;
  n.name = name;
  return add(std::move(n));
}

NodeId Graph::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return add(std::move(n));
}

NodeId Graph::affine(NodeId x, NodeId weight, NodeId bias) {
  Node n;
  n.op = Op::affine;
  n.args = {x, weight, bias};
  return add(std::move(n));
}

NodeId Graph::linear(NodeId x, NodeId weight) {
  Node n;
  n.op = Op::affine;
  n.args = {x, weight};
  return add(std::move(n));
}

NodeId Graph::causal_conv(NodeId x, NodeId history, NodeId weight, NodeId bias, std::size_t kernel) {
  Node n;
  n.op = Op::causal_conv;
  n.args = {x, history, weight, bias};
  n.begin = kernel;
  return add(std::move(n));
}

NodeId Graph::gru(NodeId x, NodeId h0, NodeId w_ih, NodeId w_hh, NodeId b_ih, NodeId b_hh) {
  Node n;
  n.op = Op::gru;
  n.args = {x, h0, w_ih, w_hh, b_ih, b_hh};
  return add(std::move(n));
}

NodeId Graph::scale(NodeId a, double factor) {
  Node n;
  n.op = Op::scale;
  n.args = {a};
  n.scalar = factor;
  return add(std::move(n));
}

NodeId Graph::add_scalar(NodeId a, double offset) {
  Node n;
  n.op = Op::add_scalar;
  n.args = {a};
  n.scalar = offset;
  return add(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, std::size_t begin, std::size_t end) {
  Node n;
  n.op = Op::slice_cols;
  n.args = {a};
  n.begin = begin;
  n.end = end;
  return add(std::move(n));
}

NodeId Graph::logistic_log_density(NodeId x, NodeId mu, NodeId s) {
  Node n;
  n.op = Op::logistic_log_density;
  n.args = {x, mu, s};
  return add(std::move(n));
}

NodeId Graph::unary(Op op, NodeId a) {
  Node n;
  n.op = op;
  n.args = {a};
  return add(std::move(n));
}

NodeId Graph::binary(Op op, NodeId a, NodeId b) {
  Node n;
  n.op = op;
  n.args = {a, b};
  return add(std::move(n));
}

void Graph::set_output(const std::string& name, NodeId id) {
  if (id >= nodes_.size()) throw Error("output node " + std::to_string(id) + " does not exist");
  outputs_[name] = id;
}

template <typename T>
TensorMap<T> Graph::forward(const Bindings<T>& inputs) const {
  Evaluation<T> eval(nodes_, inputs);
  TensorMap<T> out;
  for (const auto& [name, id] : outputs_) out.emplace(name, eval.value(id));
  return out;
}

template <typename T>
GradientResult<T> Graph::gradient(const Bindings<T>& inputs, NodeId scalar_output,
                                  const std::vector<std::string>& wrt) const {
  if (scalar_output >= nodes_.size()) throw Error("output node does not exist");

  // Ancestors of the output.
  std::vector<bool> reach(nodes_.size(), false);
  reach[scalar_output] = true;
  for (NodeId i = scalar_output + 1; i-- > 0;)
    if (reach[i])
      for (NodeId a : nodes_[i].args) reach[a] = true;

  std::vector<bool> needs(nodes_.size(), false);
  for (const auto& name : wrt) {
    auto it = inputs_.find(name);
    if (it == inputs_.end()) throw Error("gradient requested for unknown input '" + name + "'");
    if (!reach[it->second]) throw Error("input '" + name + "' is unreachable from the output");
    needs[it->second] = true;
  }
  for (NodeId i = 0; i < nodes_.size(); ++i)
    for (NodeId a : nodes_[i].args)
      if (needs[a]) needs[i] = true;
  for (NodeId i = 0; i < nodes_.size(); ++i) needs[i] = needs[i] && reach[i];

  Evaluation<T> eval(nodes_, inputs);
  const auto& out = eval.value(scalar_output);
  if (out.rows() != 1 || out.cols() != 1)
    throw Error("gradient needs a scalar output, node " + std::to_string(scalar_output) + " is " +
                shape_str(out.rows(), out.cols()));

  GradientResult<T> result;
  result.value = out(0, 0);
  for (const auto& [name, id] : outputs_) result.outputs.emplace(name, eval.value(id));

  auto adj = eval.backward(scalar_output, needs);
  for (const auto& name : wrt) {
    const NodeId id = inputs_.at(name);
    const auto& v = eval.value(id);
    if (adj[id].size() == 0)
      result.gradients[name] = Tensor<T>::Zero(v.rows(), v.cols());
    else
      result.gradients[name] = std::move(adj[id]);
  }
  return result;
}

template TensorMap<float> Graph::forward(const Bindings<float>&) const;
template TensorMap<double> Graph::forward(const Bindings<double>&) const;
template GradientResult<float> Graph::gradient(const Bindings<float>&, NodeId,
                                               const std::vector<std::string>&) const;
template GradientResult<double> Graph::gradient(const Bindings<double>&, NodeId,
                                                const std::vector<std::string>&) const;

}  // namespace dpss::diffgraph
