#include "noisylab/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

namespace {

AffineLayer make_affine(int in, int out, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  AffineLayer l;
  l.weight.resize(in, out);
  const double scale = std::sqrt(2.0 / in);
  for (int i = 0; i < in; ++i)
    for (int j = 0; j < out; ++j) l.weight(i, j) = scale * gauss(rng);
  l.bias = Eigen::VectorXd::Zero(out);
  return l;
}

AffineLayer zero_like(const AffineLayer& l) {
  AffineLayer g;
  g.weight = Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols());
  g.bias = Eigen::VectorXd::Zero(l.bias.size());
  return g;
}

}  // namespace

Network::Network(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.input_dim < 1 || cfg.num_classes < 1)
    throw std::invalid_argument("Network: bad input_dim/num_classes");
  if (cfg.embed_dim < 1) throw std::invalid_argument("Network: embed_dim must be >= 1");
  const int feat = cfg.hidden.empty() ? cfg.input_dim : cfg.hidden.back();
  if (cfg.embed_dim >= feat)
    throw std::invalid_argument("Network: embed_dim must be smaller than the feature dim");
  if (cfg.projector_depth != 1 && cfg.projector_depth != 2)
    throw std::invalid_argument("Network: projector_depth must be 1 or 2");

  Rng rng(seed);
  int in = cfg.input_dim;
  for (int width : cfg.hidden) {
    backbone.push_back(make_affine(in, width, rng));
    in = width;
  }
  classifier = make_affine(in, cfg.num_classes, rng);
  if (cfg.projector_depth == 1) {
    projector.push_back(make_affine(in, cfg.embed_dim, rng));
  } else {
    const int mid = std::max(cfg.embed_dim, in / 2);
    projector.push_back(make_affine(in, mid, rng));
    projector.push_back(make_affine(mid, cfg.embed_dim, rng));
  }
}

ForwardBatch Network::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != cfg_.input_dim)
    throw std::invalid_argument("Network::forward: input has " + std::to_string(x.cols()) +
                                " columns, expected " + std::to_string(cfg_.input_dim));

  ForwardBatch out;
  out.input = x;
  out.params_revision = revision_;

  Eigen::MatrixXd act = x;
  for (const auto& layer : backbone) {
    Eigen::MatrixXd pre = (act * layer.weight).rowwise() + layer.bias.transpose();
    out.backbone_pre.push_back(pre);
    act = pre.cwiseMax(0.0);
    out.backbone_act.push_back(act);
  }
  out.feature = act;

  out.logits = (act * classifier.weight).rowwise() + classifier.bias.transpose();
  out.probs = softmax_rows(out.logits);

  Eigen::MatrixXd p = act;
  for (std::size_t li = 0; li < projector.size(); ++li) {
    Eigen::MatrixXd pre = (p * projector[li].weight).rowwise() + projector[li].bias.transpose();
    out.projector_pre.push_back(pre);
    p = (li + 1 < projector.size()) ? pre.cwiseMax(0.0) : pre;
  }
  out.proj_raw = p;
  out.proj_norm = p.rowwise().norm();
  out.embedding.resize(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double n = out.proj_norm(i);
    out.embedding.row(i) = n > 1e-12 ? (p.row(i) / n).eval() : Eigen::RowVectorXd::Zero(p.cols()).eval();
  }
  return out;
}

NetworkGradients Network::zero_gradients() const {
  NetworkGradients g;
  for (const auto& l : backbone) g.backbone.push_back(zero_like(l));
  g.classifier = zero_like(classifier);
  for (const auto& l : projector) g.projector.push_back(zero_like(l));
  return g;
}

NetworkGradients Network::backward(const ForwardBatch& cache, const BackpropSeed& seed,
                                   bool stop_at_projector_input) const {
  if (cache.params_revision != revision_)
    throw std::runtime_error("Network::backward: stale forward cache (parameters changed)");

  const Eigen::Index n = cache.input.rows();
  NetworkGradients g = zero_gradients();

  Eigen::MatrixXd d_feature = Eigen::MatrixXd::Zero(n, cache.feature.cols());

  if (seed.d_logits.size() > 0) {
    if (seed.d_logits.rows() != n || seed.d_logits.cols() != cfg_.num_classes)
      throw std::invalid_argument("Network::backward: d_logits shape mismatch");
    g.classifier.weight = cache.feature.transpose() * seed.d_logits;
    g.classifier.bias = seed.d_logits.colwise().sum();
    d_feature += seed.d_logits * classifier.weight.transpose();
  }

  if (seed.d_embedding.size() > 0) {
    if (seed.d_embedding.rows() != n || seed.d_embedding.cols() != cfg_.embed_dim)
      throw std::invalid_argument("Network::backward: d_embedding shape mismatch");

    // Through L2 normalization: du = (de - (de.e) e) / ||u||.
    Eigen::MatrixXd d_raw(n, cfg_.embed_dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double norm = cache.proj_norm(i);
      if (norm <= 1e-12) {
        d_raw.row(i).setZero();
        continue;
      }
      const Eigen::RowVectorXd e = cache.embedding.row(i);
      const Eigen::RowVectorXd de = seed.d_embedding.row(i);
      d_raw.row(i) = (de - de.dot(e) * e) / norm;
    }

    Eigen::MatrixXd d_out = d_raw;
    for (int li = static_cast<int>(projector.size()) - 1; li >= 0; --li) {
      if (li + 1 < static_cast<int>(projector.size()))
        d_out = d_out.cwiseProduct(
            (cache.projector_pre[li].array() > 0.0).cast<double>().matrix());
      Eigen::MatrixXd layer_in_act;
      const Eigen::MatrixXd* layer_in = &cache.feature;
      if (li > 0) {
        layer_in_act = cache.projector_pre[li - 1].cwiseMax(0.0);
        layer_in = &layer_in_act;
      }
      g.projector[li].weight = layer_in->transpose() * d_out;
      g.projector[li].bias = d_out.colwise().sum();
      d_out = d_out * projector[li].weight.transpose();
    }
    if (!stop_at_projector_input) d_feature += d_out;
  }

  Eigen::MatrixXd d_act = d_feature;
  for (int li = static_cast<int>(backbone.size()) - 1; li >= 0; --li) {
    Eigen::MatrixXd d_pre =
        d_act.cwiseProduct((cache.backbone_pre[li].array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd& layer_in = li == 0 ? cache.input : cache.backbone_act[li - 1];
    g.backbone[li].weight = layer_in.transpose() * d_pre;
    g.backbone[li].bias = d_pre.colwise().sum();
    if (li > 0) d_act = d_pre * backbone[li].weight.transpose();
  }
  return g;
}

double cross_entropy(const Eigen::VectorXd& probs, int label) {
  if (label < 0 || label >= probs.size())
    throw std::invalid_argument("cross_entropy: label out of range");
  return -std::log(probs(label));
}

double cross_entropy_logits(const Eigen::VectorXd& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw std::invalid_argument("cross_entropy_logits: label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(label);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

std::vector<double> per_sample_ce(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  if (logits.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("per_sample_ce: rows/labels mismatch");
  std::vector<double> out(labels.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    out[i] = cross_entropy_logits(logits.row(i), labels[i]);
  return out;
}

void SgdOptimizer::step(double* param, const double* grad, Eigen::Index n, int slot,
                        const std::string& name) {
  if (slot >= static_cast<int>(buffers_.size())) buffers_.resize(slot + 1);
  if (buffers_[slot].size() != n) buffers_[slot] = Eigen::VectorXd::Zero(n);

  Eigen::Map<Eigen::ArrayXd> p(param, n);
  Eigen::Map<const Eigen::ArrayXd> g(grad, n);
  if (!g.isFinite().all())
    throw std::runtime_error("sgd_step: non-finite gradient in " + name);

  Eigen::ArrayXd adj = g + cfg_.weight_decay * p;
  buffers_[slot].array() = cfg_.momentum * buffers_[slot].array() + adj;
  p -= cfg_.lr * buffers_[slot].array();
}

void sgd_step(Network& net, const NetworkGradients& grads, SgdOptimizer& opt, ParamGroup group) {
  int slot = 0;
  auto apply = [&](AffineLayer& l, const AffineLayer& g, const std::string& name) {
    opt.step(l.weight.data(), g.weight.data(), l.weight.size(), slot++, name + ".weight");
    opt.step(l.bias.data(), g.bias.data(), l.bias.size(), slot++, name + ".bias");
  };
  if (group == ParamGroup::backbone_and_classifier) {
    for (std::size_t i = 0; i < net.backbone.size(); ++i)
      apply(net.backbone[i], grads.backbone[i], "backbone[" + std::to_string(i) + "]");
    apply(net.classifier, grads.classifier, "classifier");
  } else {
    for (std::size_t i = 0; i < net.projector.size(); ++i)
      apply(net.projector[i], grads.projector[i], "projector[" + std::to_string(i) + "]");
  }
  net.bump_revision();
}

namespace {

nlohmann::json layer_to_json(const AffineLayer& l) {
  std::vector<double> w(l.weight.data(), l.weight.data() + l.weight.size());
  std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
  return {{"in", l.weight.rows()}, {"out", l.weight.cols()}, {"weight", w}, {"bias", b}};
}

AffineLayer layer_from_json(const nlohmann::json& j) {
  AffineLayer l;
  const int in = j.at("in").get<int>();
  const int out = j.at("out").get<int>();
  auto w = j.at("weight").get<std::vector<double>>();
  auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<int>(w.size()) != in * out || static_cast<int>(b.size()) != out)
    throw std::runtime_error("checkpoint: layer shape mismatch");
  l.weight = Eigen::Map<Eigen::MatrixXd>(w.data(), in, out);
  l.bias = Eigen::Map<Eigen::VectorXd>(b.data(), out);
  return l;
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["config"] = {{"input_dim", net.config().input_dim},
                 {"num_classes", net.config().num_classes},
                 {"hidden", net.config().hidden},
                 {"embed_dim", net.config().embed_dim},
                 {"projector_depth", net.config().projector_depth}};
  nlohmann::json bb = nlohmann::json::array();
  for (const auto& l : net.backbone) bb.push_back(layer_to_json(l));
  j["backbone"] = bb;
  j["classifier"] = layer_to_json(net.classifier);
  nlohmann::json pj = nlohmann::json::array();
  for (const auto& l : net.projector) pj.push_back(layer_to_json(l));
  j["projector"] = pj;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump() << "\n";
}

Network load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("schema_version", 0) != 1)
    throw std::runtime_error("load_checkpoint: unsupported schema_version");

  NetworkConfig cfg;
  cfg.input_dim = j.at("config").at("input_dim").get<int>();
  cfg.num_classes = j.at("config").at("num_classes").get<int>();
  cfg.hidden = j.at("config").at("hidden").get<std::vector<int>>();
  cfg.embed_dim = j.at("config").at("embed_dim").get<int>();
  cfg.projector_depth = j.at("config").at("projector_depth").get<int>();

  Network net(cfg, 0);
  const auto& bb = j.at("backbone");
  if (bb.size() != net.backbone.size()) throw std::runtime_error("checkpoint: backbone depth mismatch");
  for (std::size_t i = 0; i < net.backbone.size(); ++i) net.backbone[i] = layer_from_json(bb[i]);
  net.classifier = layer_from_json(j.at("classifier"));
  const auto& pj = j.at("projector");
  if (pj.size() != net.projector.size()) throw std::runtime_error("checkpoint: projector depth mismatch");
  for (std::size_t i = 0; i < net.projector.size(); ++i) net.projector[i] = layer_from_json(pj[i]);
  return net;
}

}  // namespace noisylab
