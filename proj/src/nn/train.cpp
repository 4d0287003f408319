#include "holopart/nn/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace holopart::nn {

bool is_vae_param(const std::string& name) {
  return name.rfind("vae.", 0) == 0;
}

bool is_flow_param(const std::string& name) {
  for (const char* prefix : {"ctx.", "loc.", "null.", "dit."})
    if (name.rfind(prefix, 0) == 0) return true;
  return false;
}

double adamw_step(ParamSet<float>& params, OptimizerState& state, const AdamWConfig& config,
                  const std::function<bool(const std::string&)>& trainable) {
  double norm_sq = 0.0;
  for (const auto& p : params.all())
    if (trainable(p.name) && p.grad.size() == p.value.size()) norm_sq += p.grad.cast<double>().squaredNorm();
  const double norm = std::sqrt(norm_sq);
  const double clip = (config.clip_norm > 0.0 && norm > config.clip_norm) ? config.clip_norm / norm : 1.0;

  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<float>(config.beta1), b2 = static_cast<float>(config.beta2);
  for (auto& p : params.all()) {
    if (!trainable(p.name)) continue;
    if (p.grad.size() != p.value.size()) p.grad.setZero(p.value.rows(), p.value.cols());
    auto& m = state.first_moment[p.name];
    auto& v = state.second_moment[p.name];
    if (m.size() != p.value.size()) m.setZero(p.value.rows(), p.value.cols());
    if (v.size() != p.value.size()) v.setZero(p.value.rows(), p.value.cols());
    const Matrix<float> g = p.grad * static_cast<float>(clip);
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    const bool decays = p.name.size() > 7 && p.name.compare(p.name.size() - 7, 7, ".weight") == 0;
    if (decays) p.value *= static_cast<float>(1.0 - config.lr * config.weight_decay);
    const auto step = static_cast<float>(config.lr / bc1);
    const auto denom_scale = static_cast<float>(1.0 / std::sqrt(bc2));
    p.value.array() -= step * m.array() / (v.array().sqrt() * denom_scale + static_cast<float>(config.eps));
  }
  return norm;
}

// --- checkpoint -------------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'H', 'P', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRef {
  std::string name;
  const Matrix<float>* data;
};

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::vector<TensorRef> tensors;
  for (const auto& p : checkpoint.params.all()) tensors.push_back({"param/" + p.name, &p.value});
  nlohmann::json optim = nlohmann::json::object();
  for (const auto& [key, st] : checkpoint.optimizers) {
    optim[key]["step"] = st.step;
    for (const auto& [name, m] : st.first_moment) tensors.push_back({"optim/" + key + "/m/" + name, &m});
    for (const auto& [name, v] : st.second_moment) tensors.push_back({"optim/" + key + "/v/" + name, &v});
  }
  nlohmann::json header;
  header["config"] = checkpoint.config;
  header["optimizers"] = optim;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors)
    header["tensors"].push_back({{"name", t.name}, {"dtype", "float32"}, {"shape", {t.data->rows(), t.data->cols()}}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.data->data()),
              static_cast<std::streamsize>(t.data->size() * static_cast<Eigen::Index>(sizeof(float))));
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw InputError("not a checkpoint: " + path.string());
  if (version != kCheckpointVersion) throw InputError("unsupported checkpoint version " + std::to_string(version));
  if (length > (1ULL << 30)) throw InputError("corrupt checkpoint header");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("corrupt checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  ck.config = header.at("config");
  for (const auto& [key, st] : header.at("optimizers").items()) ck.optimizers[key].step = st.at("step").get<long>();
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    if (t.at("dtype").get<std::string>() != "float32") throw InputError("unsupported tensor dtype in " + name);
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    Matrix<float> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * static_cast<Eigen::Index>(sizeof(float))));
    if (!in) throw InputError("truncated checkpoint at tensor " + name);
    if (name.rfind("param/", 0) == 0) {
      ck.params.add(name.substr(6), std::move(m));
    } else if (name.rfind("optim/", 0) == 0) {
      const auto rest = name.substr(6);
      const auto slash = rest.find('/');
      const auto key = rest.substr(0, slash);
      const auto kind = rest.substr(slash + 1, 1);
      const auto pname = rest.substr(slash + 3);
      auto& st = ck.optimizers[key];
      (kind == "m" ? st.first_moment : st.second_moment)[pname] = std::move(m);
    } else {
      throw InputError("unknown checkpoint tensor " + name);
    }
  }
  return ck;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_freqs", c.n_freqs},
          {"width", c.width},
          {"heads", c.heads},
          {"mlp_ratio", c.mlp_ratio},
          {"latent_tokens", c.latent_tokens},
          {"latent_channels", c.latent_channels},
          {"vae_decoder_layers", c.vae_decoder_layers},
          {"dit_layers", c.dit_layers},
          {"condition_tokens", c.condition_tokens},
          {"context_layers", c.context_layers},
          {"kl_weight", c.kl_weight}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "n_freqs") c.n_freqs = value.get<int>();
    else if (key == "width") c.width = value.get<int>();
    else if (key == "heads") c.heads = value.get<int>();
    else if (key == "mlp_ratio") c.mlp_ratio = value.get<int>();
    else if (key == "latent_tokens") c.latent_tokens = value.get<int>();
    else if (key == "latent_channels") c.latent_channels = value.get<int>();
    else if (key == "vae_decoder_layers") c.vae_decoder_layers = value.get<int>();
    else if (key == "dit_layers") c.dit_layers = value.get<int>();
    else if (key == "condition_tokens") c.condition_tokens = value.get<int>();
    else if (key == "context_layers") c.context_layers = value.get<int>();
    else if (key == "kl_weight") c.kl_weight = value.get<double>();
    else throw InputError("unknown model config key: " + key);
  }
  c.validate();
  return c;
}

// --- training ---------------------------------------------------------------------------------

namespace {

struct Snapshot {
  std::vector<Matrix<float>> values;
  OptimizerState state;
  long step = 0;
};

Snapshot take_snapshot(const ParamSet<float>& params, const OptimizerState& state) {
  Snapshot s;
  for (const auto& p : params.all()) s.values.push_back(p.value);
  s.state = state;
  s.step = state.step;
  return s;
}

void restore(ParamSet<float>& params, OptimizerState& state, const Snapshot& s) {
  std::size_t i = 0;
  for (auto& p : params.all()) p.value = s.values[i++];
  state = s.state;
}

std::vector<std::size_t> draw_batch(std::size_t n, int batch, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> out(static_cast<std::size_t>(batch));
  for (auto& i : out) i = pick(rng);
  return out;
}

Matrix<float> gaussian_float(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  Matrix<float> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix<float> query_embedding(const ShapeExample& shape, int n_freqs) {
  return pos_emb<float>(shape.queries, {}, {}, n_freqs);
}

Matrix<float> occupancy_column(const ShapeExample& shape) {
  Matrix<float> m(static_cast<Eigen::Index>(shape.occupancy.size()), 1);
  for (std::size_t i = 0; i < shape.occupancy.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = shape.occupancy[i];
  return m;
}

template <typename StepFn>
void run_loop(ParamSet<float>& params, OptimizerState& state, const TrainOptions& options, const char* what,
              StepFn&& step_fn) {
  if (options.batch < 1) throw InputError("batch size must be positive");
  Snapshot snap = take_snapshot(params, state);
  while (state.step < options.steps) {
    std::mt19937_64 rng(derive_seed(derive_seed(options.seed, what), static_cast<std::uint64_t>(state.step)));
    params.zero_grad();
    double drop_fraction = 0.0;
    const double loss = step_fn(rng, drop_fraction);
    bool finite = std::isfinite(loss);
    for (const auto& p : params.all()) finite = finite && p.grad.allFinite();
    if (!finite) {
      const long bad = state.step + 1;
      restore(params, state, snap);
      throw NumericError(std::string(what) + " loss diverged at step " + std::to_string(bad) +
                         "; restored step " + std::to_string(snap.step));
    }
    const auto trainable = std::string(what) == "vae" ? is_vae_param : is_flow_param;
    adamw_step(params, state, options.optimizer, trainable);
    if (options.on_loss) options.on_loss({state.step, loss, options.optimizer.lr, drop_fraction});
    if (options.snapshot_every > 0 && state.step % options.snapshot_every == 0) {
      snap = take_snapshot(params, state);
      if (options.on_snapshot) options.on_snapshot(state.step);
    }
  }
}

}  // namespace

void train_vae(const ModelConfig& config, ParamSet<float>& params, OptimizerState& state,
               std::span<const ShapeExample> shapes, const TrainOptions& options) {
  if (shapes.empty()) throw InputError("empty VAE training set");
  run_loop(params, state, options, "vae", [&](std::mt19937_64& rng, double&) {
    const auto batch = draw_batch(shapes.size(), options.batch, rng);
    std::vector<Matrix<float>> q, pts, occ_q, occ;
    for (const std::size_t i : batch) {
      ShapeEmbedding e = embed_shape(shapes[i], config.n_freqs);
      q.push_back(std::move(e.query_emb));
      pts.push_back(std::move(e.point_emb));
      occ_q.push_back(query_embedding(shapes[i], config.n_freqs));
      occ.push_back(occupancy_column(shapes[i]));
    }
    const int groups = options.batch;
    Tape<float> tape;
    const VaeEncoding enc = vae_encode(tape, params, config, stack_rows(q), stack_rows(pts), groups);
    const Matrix<float> noise = gaussian_float(tape.value(enc.mean).rows(), tape.value(enc.mean).cols(), rng);
    const Var z = tape.reparameterize(enc.mean, enc.logvar, noise);
    const Var logits = vae_decode(tape, params, config, z, stack_rows(occ_q), groups);
    const Var loss = vae_loss(tape, logits, stack_rows(occ), enc.mean, enc.logvar, static_cast<float>(config.kl_weight));
    tape.backward(loss);
    return static_cast<double>(tape.value(loss)(0, 0));
  });
}

LatentMatrix encode_mean(const ModelConfig& config, ParamSet<float>& params, const ShapeExample& shape) {
  const ShapeEmbedding e = embed_shape(shape, config.n_freqs);
  Tape<float> tape(false);
  const VaeEncoding enc = vae_encode(tape, params, config, e.query_emb, e.point_emb, 1);
  return tape.value(enc.mean).cast<double>();
}

void fit_latent_normalization(ParamSet<float>& params, std::span<const LatentMatrix> latents) {
  if (latents.empty()) throw InputError("no latents to fit normalization");
  const Eigen::Index c = latents[0].cols();
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(c), sum_sq = Eigen::ArrayXd::Zero(c);
  double count = 0.0;
  for (const auto& z : latents) {
    if (z.cols() != c) throw InputError("latent width mismatch");
    sum += z.colwise().sum().transpose().array();
    sum_sq += z.array().square().colwise().sum().transpose();
    count += static_cast<double>(z.rows());
  }
  const Eigen::ArrayXd mean = sum / count;
  const Eigen::ArrayXd var = (sum_sq / count - mean.square()).max(1e-12);
  auto& pm = params["latent.mean"].value;
  auto& ps = params["latent.std"].value;
  for (Eigen::Index j = 0; j < c; ++j) {
    pm(0, j) = static_cast<float>(mean(j));
    ps(0, j) = static_cast<float>(std::sqrt(var(j)));
  }
}

LatentMatrix normalize_latent(const ParamSet<float>& params, const LatentMatrix& z) {
  const auto mean = params["latent.mean"].value.cast<double>();
  const auto stdev = params["latent.std"].value.cast<double>();
  LatentMatrix out = z;
  out.rowwise() -= mean.row(0);
  return out.array().rowwise() / stdev.row(0).array();
}

LatentMatrix denormalize_latent(const ParamSet<float>& params, const LatentMatrix& z) {
  const auto mean = params["latent.mean"].value.cast<double>();
  const auto stdev = params["latent.std"].value.cast<double>();
  LatentMatrix out = z.array().rowwise() * stdev.row(0).array();
  out.rowwise() += mean.row(0);
  return out;
}

void train_flow(const ModelConfig& config, ParamSet<float>& params, OptimizerState& state,
                std::span<const PartExample> examples, std::span<const LatentMatrix> targets,
                const TrainOptions& options) {
  if (examples.empty()) throw InputError("empty part training set");
  if (examples.size() != targets.size()) throw InputError("one target latent per example required");
  if (!(options.p_drop >= 0.0 && options.p_drop <= 1.0)) throw InputError("p_drop must lie in [0, 1]");
  const int k = config.condition_tokens;
  run_loop(params, state, options, "flow", [&](std::mt19937_64& rng, double& drop_fraction) {
    const auto batch = draw_batch(examples.size(), options.batch, rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> t;
    std::vector<bool> dropped;
    std::vector<Matrix<float>> z0, cq, ck, lq, lk;
    for (const std::size_t i : batch) {
      t.push_back(unit(rng));
      dropped.push_back(unit(rng) < options.p_drop);
      z0.push_back(targets[i].cast<float>());
      if (!dropped.back()) {
        PromptEmbedding e = embed_prompt(examples[i].prompt, config.n_freqs);
        cq.push_back(std::move(e.context_query));
        ck.push_back(std::move(e.context_keys));
        lq.push_back(std::move(e.local_query));
        lk.push_back(std::move(e.local_keys));
      }
    }
    const Matrix<float> z0m = stack_rows(z0);
    const Matrix<float> eps = gaussian_float(z0m.rows(), z0m.cols(), rng);
    const int kept = static_cast<int>(cq.size());
    drop_fraction = static_cast<double>(options.batch - kept) / options.batch;

    Tape<float> tape;
    Var co, cl;
    if (kept > 0) {
      co = context_encode(tape, params, config, stack_rows(cq), stack_rows(ck), kept);
      cl = local_encode(tape, params, config, stack_rows(lq), stack_rows(lk), kept);
    }
    std::vector<Var> context_parts, local_parts;
    int j = 0;
    for (const bool d : dropped) {
      if (d) {
        context_parts.push_back(null_context(tape, params));
        local_parts.push_back(null_local(tape, params));
      } else {
        context_parts.push_back(tape.slice_rows(co, j * k, k));
        local_parts.push_back(tape.slice_rows(cl, j * k, k));
        ++j;
      }
    }
    const Var context = tape.concat_rows(context_parts);
    const Var local = tape.concat_rows(local_parts);
    const Var loss = flow_loss(tape, params, config, z0m, t, eps, context, local, options.batch);
    tape.backward(loss);
    return static_cast<double>(tape.value(loss)(0, 0));
  });
}

}  // namespace holopart::nn
