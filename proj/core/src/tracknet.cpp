#include "qlcd/tracknet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "qlcd/errors.hpp"

namespace qlcd {
namespace {

constexpr char kMagic[4] = {'Q', 'L', 'C', 'D'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr double kSigmaFloor = 1e-8;

struct ForwardCache {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> post;  // post[0] = normalized input
};

// Batched forward; columns are samples. Returns the linear head output.
Eigen::RowVectorXd forward_batch(const TrackNetModel& m,
                                 const Eigen::MatrixXd& z0,
                                 ForwardCache* cache) {
  const int layers = static_cast<int>(m.weights.size());
  Eigen::MatrixXd a = z0;
  if (cache) {
    cache->pre.clear();
    cache->post.assign(1, a);
  }
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (m.weights[l] * a).colwise() + m.biases[l];
    if (l + 1 < layers) {
      a = z.cwiseMax(0.0);
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->post.push_back(a);
      }
    } else {
      if (cache) cache->pre.push_back(z);
      a = std::move(z);
    }
  }
  return a.row(0);
}

Eigen::MatrixXd standardize(const TrackNetModel& m, const Eigen::MatrixXd& X,
                            const std::vector<int>& rows) {
  Eigen::MatrixXd z(X.cols(), static_cast<int>(rows.size()));
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    z.col(i) = (X.row(rows[i]).transpose() - m.mu).cwiseQuotient(m.sigma);
  return z;
}

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n,
                const std::string& what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw ShapeCorruption("model file truncated while reading " + what);
}

}  // namespace

void TrackNetModel::validate() const {
  if (weights.empty() || weights.size() != biases.size())
    throw ShapeCorruption("model has no layers or mismatched biases");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() < 1 || weights[l].cols() < 1)
      throw ShapeCorruption("empty layer in model");
    if (biases[l].size() != weights[l].rows())
      throw ShapeCorruption("bias size does not match layer rows");
    if (l > 0 && weights[l].cols() != weights[l - 1].rows())
      throw ShapeCorruption("layer shapes do not chain");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw ShapeCorruption("non-finite model parameters");
  }
  if (weights.back().rows() != 1)
    throw ShapeCorruption("model head must be scalar");
  if (mu.size() != weights.front().cols() || sigma.size() != mu.size())
    throw ShapeCorruption("normalization size does not match input");
  for (int i = 0; i < sigma.size(); ++i)
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i]) || !std::isfinite(mu[i]))
      throw ShapeCorruption("normalization statistics invalid");
}

TrackNetModel make_tracknet(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2 || dims.back() != 1)
    throw DimensionMismatch("network needs >= 2 dims ending in a scalar head");
  TrackNetModel m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::MatrixXd W(dims[l + 1], dims[l]);
    const double scale = std::sqrt(2.0 / dims[l]);
    for (int i = 0; i < W.rows(); ++i)
      for (int j = 0; j < W.cols(); ++j) W(i, j) = scale * rng.normal();
    m.weights.push_back(std::move(W));
    m.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }
  m.mu = Eigen::VectorXd::Zero(dims.front());
  m.sigma = Eigen::VectorXd::Ones(dims.front());
  m.validate();
  return m;
}

double forward(const TrackNetModel& model, const Eigen::VectorXd& raw_input) {
  model.validate();
  if (raw_input.size() != model.input_dim())
    throw DimensionMismatch("input length " + std::to_string(raw_input.size()) +
                            " != model input " +
                            std::to_string(model.input_dim()));
  Eigen::MatrixXd z0 = ((raw_input - model.mu).cwiseQuotient(model.sigma));
  const double y = forward_batch(model, z0, nullptr)(0);
  const double cost = model.log_labels ? std::expm1(y) : y;
  return std::max(0.0, cost);
}

Eigen::VectorXd input_gradient(const TrackNetModel& model,
                               const Eigen::VectorXd& raw_input) {
  model.validate();
  if (raw_input.size() != model.input_dim())
    throw DimensionMismatch("input length does not match model");
  Eigen::MatrixXd z0 = ((raw_input - model.mu).cwiseQuotient(model.sigma));
  ForwardCache cache;
  const double y = forward_batch(model, z0, &cache)(0);

  // d(output)/d(head); the floor and the expm1 inverse-transform are part
  // of the chain. Subgradient 0 where the floor is active.
  double dy;
  if (model.log_labels)
    dy = std::expm1(y) > 0.0 ? std::exp(y) : 0.0;
  else
    dy = y > 0.0 ? 1.0 : 0.0;

  const int layers = static_cast<int>(model.weights.size());
  Eigen::VectorXd v = model.weights.back().transpose() * Eigen::VectorXd::Constant(1, dy);
  for (int l = layers - 2; l >= 0; --l) {
    v = v.cwiseProduct(
        (cache.pre[l].col(0).array() > 0.0).cast<double>().matrix());
    v = model.weights[l].transpose() * v;
  }
  return v.cwiseQuotient(model.sigma);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw DimensionMismatch("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw DimensionMismatch("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw DimensionMismatch("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0))
    throw DimensionMismatch("weight decay must be >= 0");
  if (epochs < 1) throw DimensionMismatch("epochs must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw DimensionMismatch("validation fraction must be in (0, 1)");
  for (int h : hidden)
    if (h < 1) throw DimensionMismatch("hidden widths must be >= 1");
}

std::pair<TrackNetModel, TrainReport> train(const Eigen::MatrixXd& X,
                                            const Eigen::VectorXd& y,
                                            const TrainConfig& config) {
  config.validate();
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  if (y.size() != n) throw DimensionMismatch("label count != sample count");
  if (n < 100) throw InsufficientData("training needs >= 100 records, got " +
                                      std::to_string(n));
  if (!X.allFinite()) throw InsufficientData("features must be finite");
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(y[i]) || y[i] < 0.0)
      throw InsufficientData("labels must be finite and >= 0");

  Rng rng(config.seed);
  TrainReport report;
  std::tie(report.train_indices, report.val_indices) =
      split_indices(n, config.validation_fraction, rng);
  const auto& tr = report.train_indices;
  const auto& va = report.val_indices;
  const int n_tr = static_cast<int>(tr.size());

  std::vector<int> dims;
  dims.push_back(d);
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(1);
  TrackNetModel model = make_tracknet(dims, rng);
  model.log_labels = config.log_labels;

  // Standardization statistics from the training split only.
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int i : tr) mean += X(i, j);
    mean /= n_tr;
    double var = 0.0;
    for (int i : tr) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= n_tr;
    model.mu[j] = mean;
    const double s = std::sqrt(var);
    // A feature that never varies in training carries no information,
    // and gradient-based planning would otherwise exploit its untrained
    // random weights. A huge sigma pins its standardized value (and its
    // input gradient) to ~0, excluding it from the model's input space.
    model.sigma[j] = s < kSigmaFloor ? kDisabledSigma : s;
  }

  auto target = [&](double label) {
    return config.log_labels ? std::log1p(label) : label;
  };
  const Eigen::MatrixXd z_val = standardize(model, X, va);
  Eigen::RowVectorXd t_val(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) t_val[i] = target(y[va[i]]);

  auto val_loss = [&]() {
    const Eigen::RowVectorXd out = forward_batch(model, z_val, nullptr);
    return (out - t_val).squaredNorm() / static_cast<double>(va.size());
  };
  report.val_loss.push_back(val_loss());

  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::VectorXd> vel_b;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                          model.weights[l].cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }

  std::vector<int> order = tr;
  const int layers = static_cast<int>(model.weights.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the training RNG keeps runs bit-reproducible.
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
    double epoch_sq = 0.0;
    for (int start = 0; start < n_tr; start += config.batch_size) {
      const int B = std::min(config.batch_size, n_tr - start);
      std::vector<int> batch(order.begin() + start, order.begin() + start + B);
      const Eigen::MatrixXd z0 = standardize(model, X, batch);
      Eigen::RowVectorXd t(B);
      for (int i = 0; i < B; ++i) t[i] = target(y[batch[i]]);

      ForwardCache cache;
      const Eigen::RowVectorXd out = forward_batch(model, z0, &cache);
      epoch_sq += (out - t).squaredNorm();

      // Backprop; dZ for the head, then peel layers.
      Eigen::MatrixXd dZ = (2.0 / B) * (out - t);
      for (int l = layers - 1; l >= 0; --l) {
        const Eigen::MatrixXd& a_in = cache.post[l];
        const Eigen::MatrixXd dW = dZ * a_in.transpose();
        const Eigen::VectorXd db = dZ.rowwise().sum();
        if (l > 0) {
          Eigen::MatrixXd dA = model.weights[l].transpose() * dZ;
          dZ = dA.cwiseProduct(
              (cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        vel_w[l] = config.momentum * vel_w[l] -
                   config.learning_rate *
                       (dW + config.weight_decay * model.weights[l]);
        vel_b[l] = config.momentum * vel_b[l] - config.learning_rate * db;
        model.weights[l] += vel_w[l];
        model.biases[l] += vel_b[l];
      }
    }
    report.train_loss.push_back(epoch_sq / n_tr);
    report.val_loss.push_back(val_loss());
    if (!std::isfinite(report.train_loss.back()) ||
        !std::isfinite(report.val_loss.back()))
      throw NonFiniteLoss("loss diverged at epoch " + std::to_string(epoch));
  }

  Eigen::VectorXd pred(va.size()), truth(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) {
    pred[i] = forward(model, X.row(va[i]).transpose());
    truth[i] = y[va[i]];
  }
  report.val_spearman = spearman(pred, truth);
  return {std::move(model), std::move(report)};
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DimensionMismatch("spearman needs two equal-length vectors, n >= 2");
  const int n = static_cast<int>(a.size());
  auto ranks = [n](const Eigen::VectorXd& v) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int i, int j) { return v[i] < v[j]; });
    Eigen::VectorXd r(n);
    int i = 0;
    while (i < n) {
      int j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (i + j) + 1.0;  // average rank, 1-based
      for (int k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const Eigen::VectorXd ra = ranks(a), rb = ranks(b);
  const double ma = ra.mean(), mb = rb.mean();
  const Eigen::VectorXd da = ra.array() - ma, db = rb.array() - mb;
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (denom == 0.0) return 0.0;
  return da.dot(db) / denom;
}

void save_model(const TrackNetModel& model, const std::filesystem::path& path) {
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write model file " + path.string());
  write_bytes(out, kMagic, 4);
  const std::uint32_t version = kFormatVersion;
  write_bytes(out, &version, 4);
  const std::uint32_t layers = static_cast<std::uint32_t>(model.weights.size());
  write_bytes(out, &layers, 4);
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t rows = static_cast<std::uint32_t>(model.weights[l].rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(model.weights[l].cols());
    write_bytes(out, &rows, 4);
    write_bytes(out, &cols, 4);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) {
        const double w = model.weights[l](i, j);
        write_bytes(out, &w, 8);
      }
    for (std::uint32_t i = 0; i < rows; ++i) {
      const double b = model.biases[l][i];
      write_bytes(out, &b, 8);
    }
  }
  for (int i = 0; i < model.mu.size(); ++i) write_bytes(out, &model.mu[i], 8);
  for (int i = 0; i < model.sigma.size(); ++i)
    write_bytes(out, &model.sigma[i], 8);
  const std::uint8_t flag = model.log_labels ? 1 : 0;
  write_bytes(out, &flag, 1);
  if (!out) throw IoFailure("write failed for " + path.string());
}

TrackNetModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open model file " + path.string());
  char magic[4];
  read_bytes(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ShapeCorruption("model file " + path.string() + ": bad magic");
  std::uint32_t version = 0;
  read_bytes(in, &version, 4, "version");
  if (version != kFormatVersion)
    throw FormatVersionMismatch("model file " + path.string() + ": version " +
                                std::to_string(version) + ", expected " +
                                std::to_string(kFormatVersion));
  std::uint32_t layers = 0;
  read_bytes(in, &layers, 4, "layer count");
  if (layers < 1 || layers > 64)
    throw ShapeCorruption("model file " + path.string() +
                          ": implausible layer count");
  TrackNetModel model;
  for (std::uint32_t l = 0; l < layers; ++l) {
    std::uint32_t rows = 0, cols = 0;
    read_bytes(in, &rows, 4, "layer shape");
    read_bytes(in, &cols, 4, "layer shape");
    if (rows < 1 || cols < 1 || rows > 1000000 || cols > 1000000)
      throw ShapeCorruption("model file " + path.string() +
                            ": implausible layer shape");
    Eigen::MatrixXd W(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j)
        read_bytes(in, &W(i, j), 8, "weights");
    Eigen::VectorXd b(rows);
    for (std::uint32_t i = 0; i < rows; ++i) read_bytes(in, &b[i], 8, "biases");
    model.weights.push_back(std::move(W));
    model.biases.push_back(std::move(b));
  }
  const int d = static_cast<int>(model.weights.front().cols());
  model.mu.resize(d);
  model.sigma.resize(d);
  for (int i = 0; i < d; ++i) read_bytes(in, &model.mu[i], 8, "mu");
  for (int i = 0; i < d; ++i) read_bytes(in, &model.sigma[i], 8, "sigma");
  std::uint8_t flag = 0;
  read_bytes(in, &flag, 1, "transform flag");
  model.log_labels = flag != 0;
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0)
    throw ShapeCorruption("model file " + path.string() + ": trailing data");
  try {
    model.validate();
  } catch (const ShapeCorruption& e) {
    throw ShapeCorruption("model file " + path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace qlcd
