#include "wait/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "wait/common.hpp"
#include "wait/flowio.hpp"
#include "wait/media.hpp"

namespace wait {

namespace fs = std::filesystem;

namespace {

std::uint64_t stream_seed(std::uint64_t seed, const std::string& tag) {
  return fnv1a64(tag + ":" + std::to_string(seed));
}

double sval(const Var& v) { return v.value()[0]; }

bool is_recycle(Variant v) {
  return v == Variant::kRecycleGan || v == Variant::kRecycleGanV2;
}

bool is_pair_variant(Variant v) {
  return v == Variant::kCycleGanTemp || v == Variant::kOpticalFlowWarp || v == Variant::kWait;
}

Tensor stack_images(const std::vector<Tensor>& items) {
  const auto& s = items.front().shape();
  Tensor out({static_cast<int>(items.size()), s[0], s[1], s[2]});
  const std::int64_t stride = items.front().numel();
  for (std::size_t i = 0; i < items.size(); ++i)
    std::copy_n(items[i].data(), stride, out.data() + static_cast<std::int64_t>(i) * stride);
  return out;
}

Tensor unsqueeze0(const Tensor& chw) {
  Tensor out({1, chw.dim(0), chw.dim(1), chw.dim(2)});
  std::copy_n(chw.data(), chw.numel(), out.data());
  return out;
}

Tensor squeeze0(const Tensor& nchw) {
  Tensor out({nchw.dim(1), nchw.dim(2), nchw.dim(3)});
  std::copy_n(nchw.data(), nchw.numel(), out.data());
  return out;
}

Tensor load_target(const data::ImageSet& set, Rng& rng, int size) {
  return data::preprocess(media::read_image(set.sample(rng)), size);
}

// Training flows are read from <flow_dir>/<frame-stem>.fwd.flo: the flow on
// frame t's grid mapping into frame t+1 (the estimate F(x_t, x_{t+1})).
// Off-size flows are resized with the vectors rescaled to the new grid.
Tensor load_training_flow(const data::FrameSequence& seq, int t, int size,
                          const fs::path& flow_dir) {
  const fs::path p = flow_dir / (seq.frames[static_cast<std::size_t>(t)].path.stem().string() +
                                 ".fwd.flo");
  if (!fs::exists(p)) throw DataError("missing flow file: " + p.string());
  return flowio::read_flo_resized(p, size);
}

void append_optim_state(const std::string& prefix, const optim::Adam& adam,
                        const std::vector<nn::NamedParam>& params, Checkpoint& ckpt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.tensors.emplace_back(prefix + "." + params[i].first + ".m",
                              adam.moment1(static_cast<int>(i)));
    ckpt.tensors.emplace_back(prefix + "." + params[i].first + ".v",
                              adam.moment2(static_cast<int>(i)));
  }
  Tensor t({1});
  t[0] = static_cast<double>(adam.steps());
  ckpt.tensors.emplace_back(prefix + ".steps", std::move(t));
}

const Tensor& require_tensor(const Checkpoint& ckpt, const std::string& name) {
  const Tensor* t = ckpt.find(name);
  if (!t) throw DataError("checkpoint missing tensor '" + name + "'");
  return *t;
}

void copy_into(Tensor& dst, const Tensor& src, const std::string& name) {
  if (dst.shape() != src.shape())
    throw DataError("checkpoint tensor '" + name + "' has mismatched shape");
  std::copy_n(src.data(), src.numel(), dst.data());
}

void restore_optim_state(const std::string& prefix, optim::Adam& adam,
                         const std::vector<nn::NamedParam>& params, const Checkpoint& ckpt) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string base = prefix + "." + params[i].first;
    copy_into(adam.moment1(static_cast<int>(i)), require_tensor(ckpt, base + ".m"), base + ".m");
    copy_into(adam.moment2(static_cast<int>(i)), require_tensor(ckpt, base + ".v"), base + ".v");
  }
  adam.set_steps(static_cast<std::int64_t>(require_tensor(ckpt, prefix + ".steps")[0]));
}

std::vector<Var> values_of(const std::vector<nn::NamedParam>& named) {
  std::vector<Var> out;
  out.reserve(named.size());
  for (const auto& nv : named) out.push_back(nv.second);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Models

Models Models::build(const VariantConfig& cfg) {
  cfg.validate();
  Models m;
  m.variant = cfg.variant;
  Rng init(stream_seed(cfg.seed, "init"));
  Rng r_gx = init.fork(1), r_gy = init.fork(2), r_dx = init.fork(3), r_dy = init.fork(4),
      r_px = init.fork(5), r_py = init.fork(6);
  if (cfg.variant == Variant::kWait)
    m.g_x_wait = std::make_unique<WaitGenerator>(cfg.generator, r_gx);
  else
    m.g_x_plain = std::make_unique<PlainGenerator>(cfg.generator, r_gx);
  m.g_y = std::make_unique<PlainGenerator>(cfg.generator, r_gy);
  m.d_x = std::make_unique<PatchDiscriminator>(cfg.generator, r_dx);
  m.d_y = std::make_unique<PatchDiscriminator>(cfg.generator, r_dy);
  if (is_recycle(cfg.variant)) {
    m.p_x = std::make_unique<TemporalPredictor>(cfg.generator, r_px);
    m.p_y = std::make_unique<TemporalPredictor>(cfg.generator, r_py);
  }
  return m;
}

Var Models::to_target(const Var& ref, const Var& aux) const {
  if (g_x_wait) return g_x_wait->forward(ref, aux);
  return g_x_plain->forward(ref);
}

Var Models::to_target_single(const Var& x) const {
  if (g_x_wait) return g_x_wait->forward_single(x);
  return g_x_plain->forward(x);
}

Var Models::to_source(const Var& y) const { return g_y->forward(y); }

std::vector<nn::NamedParam> Models::generator_parameters() const {
  std::vector<nn::NamedParam> out;
  if (g_x_wait) g_x_wait->append_parameters("g_x", out);
  if (g_x_plain) g_x_plain->append_parameters("g_x", out);
  g_y->append_parameters("g_y", out);
  if (p_x) p_x->append_parameters("p_x", out);
  if (p_y) p_y->append_parameters("p_y", out);
  return out;
}

std::vector<nn::NamedParam> Models::discriminator_parameters() const {
  std::vector<nn::NamedParam> out;
  d_x->append_parameters("d_x", out);
  d_y->append_parameters("d_y", out);
  return out;
}

std::vector<nn::NamedParam> Models::named_parameters() const {
  auto out = generator_parameters();
  auto d = discriminator_parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

void Models::zero_grad_all() const {
  for (auto& nv : named_parameters()) nv.second.zero_grad();
}

// ---------------------------------------------------------------------------
// BatchSampler

BatchSampler::BatchSampler(const data::DatasetRoot* ds, const VariantConfig* cfg)
    : ds_(ds), cfg_(cfg) {
  // Minimum clip length and valid reference range per pairing rule.
  int min_len = 1;
  if (is_pair_variant(cfg_->variant)) min_len = 2;
  if (is_recycle(cfg_->variant)) min_len = 3;
  for (int c = 0; c < static_cast<int>(ds_->train_source.size()); ++c) {
    const int len = ds_->train_source[static_cast<std::size_t>(c)].size();
    if (len < min_len) {
      std::fprintf(stderr, "warning: clip %s has %d frame(s), needs %d; skipped\n",
                   ds_->train_source[static_cast<std::size_t>(c)].source_id.c_str(), len,
                   min_len);
      continue;
    }
    int lo = 0, hi = len - 1;
    if (cfg_->variant == Variant::kOpticalFlowWarp) hi = len - 2;
    if (is_recycle(cfg_->variant)) {
      lo = 1;
      hi = len - 2;
    }
    for (int t = lo; t <= hi; ++t) index_.emplace_back(c, t);
  }
  if (index_.empty())
    throw DataError("dataset has no usable source frames for variant " +
                    std::string(to_string(cfg_->variant)));
  if (ds_->train_target.images.empty())
    throw DataError("dataset has no target images (trainB is empty)");
}

int BatchSampler::iterations_per_epoch() const {
  return (items_per_epoch() + cfg_->batch_size - 1) / cfg_->batch_size;
}

void BatchSampler::start_epoch(Rng& rng) {
  order_ = index_;
  rng.shuffle(order_);
  cursor_ = 0;
}

Batch BatchSampler::next(Rng& rng) {
  if (done()) throw DataError("BatchSampler: epoch exhausted; call start_epoch");
  const int n =
      std::min<int>(cfg_->batch_size, static_cast<int>(order_.size() - cursor_));
  const int size = cfg_->generator.image_size;
  std::vector<Tensor> xs, auxs, prevs, nexts, ys, yps, yns, flows;
  Batch b;
  for (int i = 0; i < n; ++i) {
    const auto [c, t] = order_[cursor_++];
    const auto& seq = ds_->train_source[static_cast<std::size_t>(c)];
    switch (cfg_->variant) {
      case Variant::kCycleGan:
        xs.push_back(data::load_frame(seq, t, size));
        break;
      case Variant::kCycleGanTemp:
      case Variant::kWait: {
        data::FrameSample fs = data::sample_frame_pair(seq, t, cfg_->time_gap, rng, size);
        xs.push_back(std::move(fs.reference));
        auxs.push_back(std::move(fs.auxiliary));
        break;
      }
      case Variant::kOpticalFlowWarp:
        xs.push_back(data::load_frame(seq, t, size));
        auxs.push_back(data::load_frame(seq, t + 1, size));
        flows.push_back(load_training_flow(seq, t, size, cfg_->flow_dir));
        break;
      case Variant::kRecycleGan:
      case Variant::kRecycleGanV2:
        prevs.push_back(data::load_frame(seq, t - 1, size));
        xs.push_back(data::load_frame(seq, t, size));
        nexts.push_back(data::load_frame(seq, t + 1, size));
        break;
    }
    ys.push_back(load_target(ds_->train_target, rng, size));
    if (cfg_->variant == Variant::kRecycleGan) {
      // Pseudo-triple: the target set is unordered, so "adjacent" target
      // frames are independent draws. This is the v1 design flaw v2 removes.
      yps.push_back(load_target(ds_->train_target, rng, size));
      yns.push_back(load_target(ds_->train_target, rng, size));
    }
    b.items.push_back(seq.source_id + "@" + std::to_string(t));
  }
  b.x = stack_images(xs);
  b.y = stack_images(ys);
  if (!auxs.empty()) b.x_aux = stack_images(auxs);
  if (!prevs.empty()) b.x_prev = stack_images(prevs);
  if (!nexts.empty()) b.x_next = stack_images(nexts);
  if (!yps.empty()) b.y_prev = stack_images(yps);
  if (!yns.empty()) b.y_next = stack_images(yns);
  if (!flows.empty()) b.flow = stack_images(flows);
  return b;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(VariantConfig cfg, data::DatasetRoot ds)
    : cfg_(std::move(cfg)),
      ds_(std::move(ds)),
      models_(Models::build(cfg_)),
      pool_x_(cfg_.pool_capacity),
      pool_y_(cfg_.pool_capacity),
      pool_rng_(stream_seed(cfg_.seed, "pool")),
      sampler_(&ds_, &cfg_),
      lr_(cfg_.lr) {
  adam_g_ = std::make_unique<optim::Adam>(values_of(models_.generator_parameters()),
                                          optim::AdamConfig{cfg_.lr, 0.5, 0.999, 1e-8});
  adam_d_ = std::make_unique<optim::Adam>(values_of(models_.discriminator_parameters()),
                                          optim::AdamConfig{cfg_.lr, 0.5, 0.999, 1e-8});
  const auto& split = ds_.test_source.empty() ? ds_.train_source : ds_.test_source;
  samples_from_test_ = !ds_.test_source.empty();
  for (int s = 0; s < static_cast<int>(split.size()) && sample_frames_.size() < 4; ++s)
    for (int f = 0; f < split[static_cast<std::size_t>(s)].size() && sample_frames_.size() < 4;
         ++f)
      sample_frames_.emplace_back(s, f);
}

Rng Trainer::epoch_rng(int epoch) const {
  return Rng(stream_seed(cfg_.seed, "epoch:" + std::to_string(epoch)));
}

void Trainer::set_lr(double lr) {
  lr_ = lr;
  adam_g_->set_lr(lr);
  adam_d_->set_lr(lr);
}

Batch Trainer::sample_batch() {
  if (sampler_.done()) {
    walk_rng_ = epoch_rng(walk_epoch_++);
    sampler_.start_epoch(walk_rng_);
  }
  return sampler_.next(walk_rng_);
}

losses::LossReport Trainer::train_step(const Batch& batch) {
  const std::int64_t iter = global_iter_++;
  try {
    return train_step_impl(batch);
  } catch (const NumericError& e) {
    // The abort-on-NaN policy: surface where and on what the run died.
    std::ostringstream os;
    os << e.what() << " (epoch " << epoch_ << ", iteration " << iter << ", lr " << lr_
       << "; batch:";
    for (const auto& s : batch.items) os << ' ' << s;
    os << ")";
    throw NumericError(os.str());
  }
}

losses::LossReport Trainer::train_step_impl(const Batch& batch) {
  using losses::Domain;
  if (batch.size() < 1) throw DataError("train_step: empty batch");
  const auto mode = cfg_.gan_mode;
  const auto& w = cfg_.weights;

  const Var x(batch.x);
  const Var y(batch.y);

  // Generator pass. The wait generator consumes the (reference, auxiliary)
  // pair; everything temporal in it is architecture, so its loss set is plain
  // CycleGAN. Cycle/identity paths back through G_X duplicate the reference.
  Var fake_y;
  if (cfg_.variant == Variant::kWait)
    fake_y = models_.to_target(x, Var(batch.x_aux));
  else
    fake_y = models_.to_target_single(x);
  Var rec_x = models_.to_source(fake_y);
  Var fake_x = models_.to_source(y);
  Var rec_y = models_.to_target_single(fake_x);

  Var adv_g = ops::add(losses::adversarial_loss(models_.d_y->forward(fake_y), true, mode),
                       losses::adversarial_loss(models_.d_x->forward(fake_x), true, mode));
  Var cyc = ops::add(losses::cycle_loss(x, rec_x), losses::cycle_loss(y, rec_y));
  Var total_g = ops::add(adv_g, ops::scale(cyc, w.cycle));

  Var idt;
  if (w.identity != 0.0) {
    idt = ops::add(losses::identity_loss(y, models_.to_target_single(y)),
                   losses::identity_loss(x, models_.to_source(x)));
    total_g = ops::add(total_g, ops::scale(idt, w.identity));
  }

  Var td, fw, rr, rc;
  switch (cfg_.variant) {
    case Variant::kCycleGanTemp: {
      // The auxiliary translation exists only to feed L_diff; it does not
      // join the adversarial or cycle terms.
      const Var x_aux(batch.x_aux);
      Var fake_y_aux = models_.to_target_single(x_aux);
      td = losses::temporal_diff_loss(x, x_aux, fake_y, fake_y_aux, Domain::kSource);
      total_g = ops::add(total_g, ops::scale(td, w.temp_diff));
      break;
    }
    case Variant::kOpticalFlowWarp: {
      Var fake_y_next = models_.to_target_single(Var(batch.x_aux));
      fw = losses::flow_warp_loss(fake_y, fake_y_next, Var(batch.flow), Domain::kSource);
      total_g = ops::add(total_g, ops::scale(fw, w.flow_warp));
      break;
    }
    case Variant::kRecycleGan:
    case Variant::kRecycleGanV2: {
      losses::Translate to_y = [this](const Var& a) { return models_.to_target_single(a); };
      losses::Translate to_x = [this](const Var& a) { return models_.to_source(a); };
      losses::Predict px = [this](const Var& a, const Var& b) {
        return models_.p_x->forward(a, b);
      };
      losses::Predict py = [this](const Var& a, const Var& b) {
        return models_.p_y->forward(a, b);
      };
      auto src = losses::recycle_losses(Var(batch.x_prev), x, Var(batch.x_next), to_y, to_x,
                                        px, py, Domain::kSource);
      rr = src.recurrent;
      rc = src.recycle;
      if (cfg_.variant == Variant::kRecycleGan) {
        auto tgt = losses::recycle_losses(Var(batch.y_prev), y, Var(batch.y_next), to_x, to_y,
                                          py, px, Domain::kTarget);
        rr = ops::add(rr, tgt.recurrent);
        rc = ops::add(rc, tgt.recycle);
      }
      total_g = ops::add(total_g, ops::add(ops::scale(rr, w.recurrent),
                                           ops::scale(rc, w.recycle)));
      break;
    }
    default:
      break;
  }

  losses::LossReport r;
  r.adv_G = sval(adv_g);
  r.cycle = sval(cyc);
  r.identity = idt.defined() ? sval(idt) : 0.0;
  r.temp_diff = td.defined() ? sval(td) : 0.0;
  r.flow_warp = fw.defined() ? sval(fw) : 0.0;
  r.recurrent = rr.defined() ? sval(rr) : 0.0;
  r.recycle = rc.defined() ? sval(rc) : 0.0;
  r.total_G = sval(total_g);
  if (!std::isfinite(r.total_G)) throw NumericError("non-finite generator loss");

  models_.zero_grad_all();
  backward(total_g);
  adam_g_->step();

  // Discriminator pass on history-pooled fakes; the conventional 0.5 factor
  // halves the discriminator's effective rate relative to the generator's.
  Tensor fake_y_hist = pool_y_.query_batch(fake_y.value(), pool_rng_);
  Tensor fake_x_hist = pool_x_.query_batch(fake_x.value(), pool_rng_);
  models_.zero_grad_all();
  Var d_y_loss = ops::scale(
      ops::add(losses::adversarial_loss(models_.d_y->forward(y), true, mode),
               losses::adversarial_loss(models_.d_y->forward(Var(fake_y_hist)), false, mode)),
      0.5);
  Var d_x_loss = ops::scale(
      ops::add(losses::adversarial_loss(models_.d_x->forward(x), true, mode),
               losses::adversarial_loss(models_.d_x->forward(Var(fake_x_hist)), false, mode)),
      0.5);
  Var total_d = ops::add(d_y_loss, d_x_loss);
  r.adv_D = sval(total_d);
  r.total_D = r.adv_D;
  if (!r.all_finite()) throw NumericError("non-finite loss report");
  backward(total_d);
  adam_d_->step();
  return r;
}

void Trainer::run(const std::filesystem::path& run_dir) {
  fs::create_directories(run_dir / "checkpoints");
  fs::create_directories(run_dir / "logs");
  save_config(run_dir / "config.yaml", cfg_);

  std::ofstream log(run_dir / "logs" / "losses.jsonl",
                    epoch_ > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open loss log under " + run_dir.string());
  log << std::setprecision(17);

  for (int e = epoch_; e < cfg_.epochs; ++e) {
    set_lr(cfg_.lr_policy == LrPolicy::kLinear ? optim::lr_schedule(e, cfg_.epochs, cfg_.lr)
                                               : cfg_.lr);
    do {
      const std::int64_t iter = global_iter_;
      Batch b = sample_batch();
      const losses::LossReport rep = train_step(b);
      log << "{\"epoch\":" << e << ",\"iteration\":" << iter << ",\"lr\":" << lr_;
      for (const auto& [key, value] : rep.items()) log << ",\"" << key << "\":" << value;
      log << "}\n";
    } while (!sampler_.done());
    log.flush();
    epoch_ = e + 1;
    if (epoch_ % cfg_.checkpoint_every == 0 || epoch_ == cfg_.epochs) {
      write_checkpoint_files(run_dir);
      write_samples(run_dir);
    }
  }
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint c;
  c.arch_hash = cfg_.arch_hash();
  c.epoch = static_cast<std::uint32_t>(epoch_);
  c.config_text = config_to_yaml(cfg_);
  for (const auto& [name, var] : models_.named_parameters())
    c.tensors.emplace_back(name, var.value());
  append_optim_state("optim_g", *adam_g_, models_.generator_parameters(), c);
  append_optim_state("optim_d", *adam_d_, models_.discriminator_parameters(), c);
  return c;
}

void Trainer::load_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.arch_hash != cfg_.arch_hash())
    throw DataError("architecture-hash mismatch between checkpoint and config");
  apply_model_weights(models_, ckpt);
  restore_optim_state("optim_g", *adam_g_, models_.generator_parameters(), ckpt);
  restore_optim_state("optim_d", *adam_d_, models_.discriminator_parameters(), ckpt);
  epoch_ = static_cast<int>(ckpt.epoch);
  walk_epoch_ = epoch_;
  global_iter_ = static_cast<std::int64_t>(epoch_) * sampler_.iterations_per_epoch();
}

void Trainer::write_checkpoint_files(const std::filesystem::path& run_dir) const {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03d", epoch_);
  const Checkpoint c = make_checkpoint();
  write_checkpoint(run_dir / "checkpoints" / name, c);
  write_checkpoint(run_dir / "checkpoints" / "latest", c);
}

void Trainer::write_samples(const std::filesystem::path& run_dir) const {
  if (sample_frames_.empty()) return;
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03d", epoch_);
  const fs::path dir = run_dir / "samples" / name;
  fs::create_directories(dir);
  const auto& split = samples_from_test_ ? ds_.test_source : ds_.train_source;
  NoGradGuard guard;
  for (const auto& [s, f] : sample_frames_) {
    const auto& seq = split[static_cast<std::size_t>(s)];
    const Tensor in = data::load_frame(seq, f, cfg_.generator.image_size);
    const Var out = models_.to_target_single(Var(unsqueeze0(in)));
    media::write_unit_tensor(
        dir / (seq.frames[static_cast<std::size_t>(f)].path.stem().string() + ".png"),
        squeeze0(out.value()));
  }
}

// ---------------------------------------------------------------------------
// Inference and the train entry point

void apply_model_weights(Models& models, const Checkpoint& ckpt) {
  for (auto& [name, var] : models.named_parameters())
    copy_into(var.value(), require_tensor(ckpt, name), name);
}

data::FrameSequence stylize_video(const Checkpoint& ckpt, const data::FrameSequence& frames,
                                  const StylizeOptions& opt) {
  const VariantConfig cfg = config_from_yaml(ckpt.config_text);
  if (ckpt.arch_hash != cfg.arch_hash())
    throw DataError("architecture-hash mismatch between checkpoint and its embedded config");
  Models models = Models::build(cfg);
  apply_model_weights(models, ckpt);

  fs::create_directories(opt.out_dir);
  data::FrameSequence out;
  out.source_id = frames.source_id;
  out.stride = frames.stride;
  NoGradGuard guard;
  const int n = frames.size();
  for (int i = 0; i < n; ++i) {
    const Var x(unsqueeze0(data::load_frame(frames, i, cfg.generator.image_size)));
    Var y;
    if (models.g_x_wait && opt.real_neighbor_aux && n > 1) {
      const int j = i + 1 < n ? i + 1 : i - 1;
      const Var aux(unsqueeze0(data::load_frame(frames, j, cfg.generator.image_size)));
      y = models.to_target(x, aux);
    } else {
      y = models.to_target_single(x);
    }
    const fs::path dst =
        opt.out_dir / (frames.frames[static_cast<std::size_t>(i)].path.stem().string() + ".png");
    media::write_unit_tensor(dst, squeeze0(y.value()));
    out.frames.push_back({dst, frames.frames[static_cast<std::size_t>(i)].timestamp});
  }
  return out;
}

void train(const VariantConfig& cfg, const data::DatasetRoot& ds,
           const std::filesystem::path& run_dir, bool resume) {
  Trainer trainer(cfg, ds);
  const fs::path latest = run_dir / "checkpoints" / "latest";
  if (resume && fs::exists(latest)) {
    trainer.load_checkpoint(read_checkpoint(latest));
    if (trainer.completed_epochs() >= cfg.epochs) {
      std::fprintf(stderr, "training already complete (%d epochs)\n",
                   trainer.completed_epochs());
      return;
    }
  }
  trainer.run(run_dir);
}

}  // namespace wait
