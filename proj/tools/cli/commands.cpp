#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <thread>

#include "postfilter/diagnostics/battery.hpp"
#include "postfilter/dsp/degrade.hpp"
#include "postfilter/dsp/frontend.hpp"
#include "postfilter/io/files.hpp"
#include "postfilter/trainer/corpus.hpp"
#include "postfilter/trainer/trainer.hpp"
#include "run_config.hpp"

namespace postfilter::cli {

namespace {

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

std::string checkpoint_name(std::size_t iter) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "iter_%06zu", iter);
  return buf;
}

io::SampleFormat format_for(bool pcm16) { return pcm16 ? io::SampleFormat::pcm16 : io::SampleFormat::float32; }

models::GeneratorNet& pick_generator(trainer::TrainState& state, const std::string& direction) {
  if (direction == "xy") return state.g_xy();
  if (direction == "yx") return state.g_yx();
  throw CliError("unknown direction '" + direction + "' (expected xy or yx)");
}

std::shared_ptr<const models::GeneratorNet> checkpoint_generator(const fs::path& dir, const std::string& direction,
                                                                 double& sample_rate) {
  auto state = trainer::load_checkpoint(dir);
  sample_rate = state->config().frontend.sample_rate;
  return std::make_shared<models::GeneratorNet>(pick_generator(*state, direction));
}

}  // namespace

std::vector<double> run_generator(const models::GeneratorNet& g, std::span<const double> wave, std::size_t chunk) {
  const std::size_t m = g.length_multiple();
  const std::size_t padded = (wave.size() + m - 1) / m * m;
  if (padded == wave.size()) return chunk == 0 ? g.infer(wave) : g.infer_chunked(wave, chunk);
  std::vector<double> x(wave.begin(), wave.end());
  x.resize(padded, 0.0);
  auto y = chunk == 0 ? g.infer(x) : g.infer_chunked(x, chunk);
  y.resize(wave.size());
  return y;
}

std::vector<double> run_generator_parallel(const models::GeneratorNet& g, std::span<const double> wave,
                                           std::size_t threads, std::size_t chunk) {
  if (threads <= 1 || g.length_multiple() != 1 || wave.size() < 2 * threads) return run_generator(g, wave, chunk);
  const std::size_t context = g.receptive_field().samples - 1;
  const std::size_t part = (wave.size() + threads - 1) / threads;
  std::vector<double> out(wave.size());
  std::vector<std::thread> pool;
  for (std::size_t start = 0; start < wave.size(); start += part) {
    pool.emplace_back([&, start] {
      const std::size_t stop = std::min(wave.size(), start + part);
      const std::size_t lo = start > context ? start - context : 0;
      const std::size_t hi = std::min(wave.size(), stop + context);
      const auto y = run_generator(g, wave.subspan(lo, hi - lo), chunk);
      std::copy(y.begin() + static_cast<std::ptrdiff_t>(start - lo), y.begin() + static_cast<std::ptrdiff_t>(stop - lo),
                out.begin() + static_cast<std::ptrdiff_t>(start));
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

const std::vector<std::string>& builtin_targets() {
  static const std::vector<std::string> names{"v1-random", "v2-random", "naive-updown", "identity"};
  return names;
}

ResolvedTarget resolve_target(const TargetOptions& o) {
  ResolvedTarget r;
  if (!o.checkpoint.empty()) {
    r.generator = checkpoint_generator(o.checkpoint, o.direction, r.sample_rate);
    r.label = o.checkpoint.string() + " (" + o.direction + ")";
  } else if (o.target == "identity") {
    r.label = o.target;
    r.fn = [](std::span<const double> w) { return std::vector<double>(w.begin(), w.end()); };
    return r;
  } else if (o.target == "naive-updown") {
    r.label = o.target;
    r.fn = metrics::naive_down_up;
    return r;
  } else if (o.target == "v1-random" || o.target == "v2-random") {
    auto cfg = o.target == "v1-random" ? models::generator_v1_config() : models::generator_v2_config();
    cfg.linear = o.linear;
    auto g = std::make_shared<models::GeneratorNet>(cfg, o.seed);
    models::randomize_weights(g->params(), o.seed);
    r.generator = g;
    r.label = o.target + (o.linear ? " (linear)" : "");
  } else {
    std::string valid;
    for (const auto& n : builtin_targets()) valid += (valid.empty() ? "" : ", ") + n;
    throw CliError("unknown target '" + o.target + "' (valid targets: " + valid + ", or --checkpoint DIR)");
  }
  r.margin = r.generator->receptive_field().samples;
  r.fn = [g = r.generator](std::span<const double> w) { return run_generator(*g, w); };
  return r;
}

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  trainer::SynthOptions s;
  s.sample_rate = o.sample_rate;
  s.seconds = o.seconds;
  fs::create_directories(o.out);
  const auto corpus = trainer::synthesize_corpus(o.count, o.seed, s);
  corpus.save(o.out);
  out << "wrote " << corpus.size() << " utterances (" << fmt(corpus.total_seconds()) << " s at "
      << fmt(o.sample_rate, 6) << " Hz) to " << o.out.string() << "\n";
  return 0;
}

int cmd_degrade(const DegradeOptions& o, std::ostream& out, std::ostream& err) {
  if (o.kind != "lowpass" && o.kind != "smooth_spectral")
    throw CliError("unknown degradation '" + o.kind + "' (expected lowpass or smooth_spectral)");
  const auto files = io::list_wavs(o.in);
  if (files.empty()) throw CliError("no .wav files in " + o.in.string());
  fs::create_directories(o.out);
  std::vector<std::pair<std::string, std::string>> failures;
  std::size_t written = 0;
  for (const auto& f : files) {
    try {
      const io::Wav w = io::read_wav(f);
      std::vector<double> y;
      if (o.kind == "lowpass") {
        y = dsp::lowpass(w.samples, o.cutoff_hz, w.sample_rate, o.taps);
      } else {
        dsp::SmoothingOptions s;
        s.frame_len = o.frame_len;
        s.hop = o.hop;
        s.width = o.width;
        y = dsp::smooth_spectral(w.samples, s);
      }
      for (double& v : y) v = std::clamp(v, -1.0, 1.0);
      io::write_wav(o.out / f.filename(), y, w.sample_rate, format_for(o.pcm16));
      ++written;
    } catch (const std::exception& e) {
      failures.emplace_back(f.filename().string(), e.what());
    }
  }
  out << "degraded " << written << " of " << files.size() << " files (" << o.kind << ") into " << o.out.string()
      << "\n";
  if (failures.empty()) return 0;
  err << failures.size() << " file(s) failed:\n";
  for (const auto& [name, what] : failures) err << "  " << name << ": " << what << "\n";
  return 1;
}

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  RunConfig rc = resolve_run_config(o.preset, o.config, o.overrides);
  std::unique_ptr<trainer::TrainState> state;
  if (!o.resume.empty()) {
    state = trainer::load_checkpoint(o.resume);
    rc.train = state->config();
  }
  if (rc.x_dir.empty() || rc.y_dir.empty()) throw CliError("corpus.x_dir and corpus.y_dir must be set");
  const auto x = trainer::Corpus::load(rc.x_dir, trainer::CorpusRole::x_synthetic);
  const auto y = trainer::Corpus::load(rc.y_dir, trainer::CorpusRole::y_natural);
  const double sr = rc.train.frontend.sample_rate;
  for (const auto* c : {&x, &y}) {
    if (c->sample_rate() != sr)
      throw CliError("corpus sample rate " + fmt(c->sample_rate(), 6) + " Hz does not match frontend.sample_rate " +
                     fmt(sr, 6) + " Hz");
  }
  if (!state) state = std::make_unique<trainer::TrainState>(rc.train);

  fs::create_directories(rc.output_dir / "checkpoints");
  io::write_atomic(rc.output_dir / "config.json", to_json(rc).dump(2) + "\n");
  const fs::path loss_csv = rc.output_dir / "loss.csv";
  const auto& cfg = state->config();
  out << "training " << cfg.generator.arch << " (" << state->g_xy().parameter_count() << " parameters per generator, "
      << to_string(cfg.pairing) << ") from iteration " << state->iter() << " to " << cfg.total_iters << "\n";

  const auto start = std::chrono::steady_clock::now();
  auto checkpoint = [&](const fs::path& dir) { trainer::save_checkpoint(*state, dir, rc.storage); };
  try {
    trainer::train(*state, x, y, cfg.total_iters, [&](const trainer::StepResult& r) {
      const std::size_t done = state->iter();
      if (cfg.log_interval > 0 && (done % cfg.log_interval == 0 || done == cfg.total_iters)) {
        trainer::loss_table(*state).save(loss_csv);
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out << "iter " << done << "  lr " << fmt(r.lr) << "  G " << fmt(r.report.generator_loss) << "  D "
            << fmt(r.discriminator_loss) << "  cyc " << fmt(r.report.cyc) << "  " << fmt(elapsed, 3) << " s\n";
        out.flush();
      }
      if (cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0)
        checkpoint(rc.output_dir / "checkpoints" / checkpoint_name(done));
    });
  } catch (const trainer::TrainingError& e) {
    trainer::loss_table(*state).save(loss_csv);
    err << "training stopped: " << e.what() << "\n";
    return 1;
  }
  trainer::loss_table(*state).save(loss_csv);
  checkpoint(rc.output_dir / "final");
  out << "wrote " << (rc.output_dir / "final").string() << " and " << loss_csv.string() << "\n";
  return 0;
}

int cmd_convert(const ConvertOptions& o, std::ostream& out, std::ostream& err) {
  double sr = 0.0;
  const auto g = checkpoint_generator(o.checkpoint, o.direction, sr);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(o.in)) {
    fs::create_directories(o.out);
    for (const auto& f : io::list_wavs(o.in)) jobs.emplace_back(f, o.out / f.filename());
    if (jobs.empty()) throw CliError("no .wav files in " + o.in.string());
  } else {
    if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
    jobs.emplace_back(o.in, o.out);
  }
  for (const auto& [src, dst] : jobs) {
    const io::Wav w = io::read_wav(src);
    if (static_cast<double>(w.sample_rate) != sr)
      throw CliError(src.string() + ": sample rate " + std::to_string(w.sample_rate) +
                     " Hz does not match the checkpoint's " + fmt(sr, 6) + " Hz");
    auto y = run_generator(*g, w.samples, o.chunk);
    if (o.normalize) {
      double peak = 0.0;
      for (double v : y) peak = std::max(peak, std::abs(v));
      if (peak > 0.0)
        for (double& v : y) v *= 0.99 / peak;
    }
    for (double& v : y) v = std::clamp(v, -1.0, 1.0);
    io::write_wav(dst, y, w.sample_rate, format_for(o.pcm16));
  }
  out << "converted " << jobs.size() << " file(s) with G_" << o.direction << "\n";
  (void)err;
  return 0;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
  for (const auto& m : o.metrics)
    if (m != "lsd" && m != "msd") throw CliError("unknown metric '" + m + "' (expected lsd or msd)");
  auto load_dir = [](const fs::path& dir) {
    std::map<std::string, io::Wav> wavs;
    for (const auto& f : io::list_wavs(dir)) wavs.emplace(f.stem().string(), io::read_wav(f));
    if (wavs.empty()) throw CliError("no .wav files in " + dir.string());
    return wavs;
  };
  const auto ref = load_dir(o.ref);
  const auto deg = load_dir(o.deg);
  const std::uint32_t sr = ref.begin()->second.sample_rate;
  for (const auto* side : {&ref, &deg})
    for (const auto& [id, w] : *side)
      if (w.sample_rate != sr)
        throw CliError("utterance '" + id + "' has sample rate " + std::to_string(w.sample_rate) + " Hz, expected " +
                       std::to_string(sr) + " Hz");
  std::vector<std::string> paired;
  for (const auto& [id, w] : ref) {
    if (deg.count(id))
      paired.push_back(id);
    else
      err << "skipped '" << id << "': missing from " << o.deg.string() << "\n";
  }
  for (const auto& [id, w] : deg)
    if (!ref.count(id)) err << "skipped '" << id << "': missing from " << o.ref.string() << "\n";
  fs::create_directories(o.out);

  const bool want_lsd = std::find(o.metrics.begin(), o.metrics.end(), "lsd") != o.metrics.end();
  const bool want_msd = std::find(o.metrics.begin(), o.metrics.end(), "msd") != o.metrics.end();
  if (want_lsd) {
    if (paired.empty()) throw CliError("lsd: no utterance id is present in both directories");
    metrics::MetricReport lsd;
    lsd.metric = "lsd";
    for (const auto& id : paired) lsd.add(id, metrics::lsd(ref.at(id).samples, deg.at(id).samples));
    lsd.table().save(o.out / "lsd.csv");
    out << "lsd: mean " << fmt(lsd.mean()) << " dB +- " << fmt(lsd.ci95()) << " over " << paired.size()
        << " utterances\n";
  }
  if (want_msd) {
    dsp::FrontendConfig fc;
    fc.sample_rate = sr;
    fc.kind = dsp::FeatureKind::mfcc;
    const dsp::SpectralFrontend frontend(fc);
    std::map<std::string, dsp::FeatureTrack> ref_tracks, deg_tracks;
    for (const auto& [id, w] : ref) ref_tracks.emplace(id, frontend.analyze(w.samples));
    for (const auto& [id, w] : deg) deg_tracks.emplace(id, frontend.analyze(w.samples));
    auto values = [](const std::map<std::string, dsp::FeatureTrack>& m) {
      std::vector<dsp::FeatureTrack> v;
      for (const auto& [id, t] : m) v.push_back(t);
      return v;
    };
    const auto curve = metrics::msd(values(deg_tracks), values(ref_tracks));
    metrics::curve_table(curve).save(o.out / "msd_curve.csv");
    out << "msd: mean over the top quartile of modulation frequencies " << fmt(metrics::high_band_mean(curve))
        << " dB (MFCC c1.." << fc.n_ceps - 1 << ", averaged)\n";
    if (!paired.empty()) {
      metrics::MetricReport msd;
      msd.metric = "msd_high_band";
      for (const auto& id : paired) {
        const std::vector<dsp::FeatureTrack> d{deg_tracks.at(id)}, r{ref_tracks.at(id)};
        msd.add(id, metrics::high_band_mean(metrics::msd(d, r)));
      }
      msd.table().save(o.out / "msd.csv");
    }
  }
  return 0;
}

int cmd_probe(const ProbeOptions& o, std::ostream& out) {
  if (o.kind != "alias" && o.kind != "shift") throw CliError("unknown probe '" + o.kind + "' (expected alias or shift)");
  const ResolvedTarget t = resolve_target(o.target);
  const double sr = t.sample_rate > 0.0 ? t.sample_rate : o.sample_rate;
  const auto start = std::chrono::steady_clock::now();
  io::CsvTable table({"shift", "max_deviation"});
  if (o.kind == "alias") {
    metrics::AliasProbeOptions a;
    a.duration_s = o.duration_s;
    a.margin = t.margin;
    const auto r = metrics::alias_probe(t.fn, o.tone_hz, sr, a);
    table = r.table();
    out << "alias probe: " << t.label << ", " << fmt(o.tone_hz, 6) << " Hz tone at " << fmt(sr, 6) << " Hz\n";
    for (const auto& p : r.peaks)
      out << "  peak " << fmt(p.frequency_hz, 6) << " Hz (mirror " << fmt(sr - p.frequency_hz, 6) << " Hz)  "
          << fmt(p.relative_db) << " dB\n";
    out << "  image-to-signal " << fmt(r.image_to_signal_db) << " dB\n";
  } else {
    std::mt19937_64 rng(o.target.seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<double> wave(o.length);
    for (double& v : wave) v = u(rng);
    const auto dev = metrics::shift_equivariance_probe(t.fn, wave, o.max_shift, std::max<std::size_t>(t.margin, 2));
    out << "shift probe: " << t.label << ", " << o.length << " samples\n";
    double worst = 0.0;
    for (std::size_t s = 0; s < dev.size(); ++s) {
      table.add_row({std::to_string(s), io::format_double(dev[s])});
      out << "  shift " << s << "  max deviation " << fmt(dev[s]) << "\n";
      worst = std::max(worst, dev[s]);
    }
    out << "  max deviation over shifts " << fmt(worst) << "\n";
  }
  out << "  " << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 3) << " s\n";
  if (!o.out.empty()) table.save(o.out);
  return 0;
}

int cmd_bench(const BenchOptions& o, std::ostream& out) {
  TargetOptions to = o.target;
  if (to.target.empty() && to.checkpoint.empty()) to.target = "v2-random";
  const ResolvedTarget t = resolve_target(to);
  const double sr = t.sample_rate > 0.0 ? t.sample_rate : o.sample_rate;
  metrics::WaveFn fn = t.fn;
  if (t.generator)
    fn = [g = t.generator, n = o.threads, c = o.chunk](std::span<const double> w) {
      return run_generator_parallel(*g, w, n, c);
    };
  const auto r = metrics::throughput_bench(fn, sr, o.seconds, o.threads, o.runs);
  out << "bench: " << t.label << ", " << fmt(o.seconds) << " s of audio at " << fmt(sr, 6) << " Hz, " << o.threads
      << " thread(s), median of " << r.runs << " runs (" << r.build_mode << " build)\n"
      << "  samples_per_second " << fmt(r.samples_per_second, 6) << "\n"
      << "  real_time_factor " << fmt(r.real_time_factor, 4) << "\n";
  if (!o.out.empty()) r.table().save(o.out);
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  const auto outcomes = diagnostics::run_battery(o.seeds, o.first_seed, o.filter);
  if (outcomes.empty()) throw CliError("no gradient-check case matches '" + o.filter + "'");
  std::size_t failed = 0;
  double seconds = 0.0;
  for (const auto& c : outcomes) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-30s %-4s max rel err %.3g (tol %.0e, worst seed %llu)\n", c.name.c_str(),
                  c.passed() ? "ok" : "FAIL", c.worst.max_rel_error, c.tolerance,
                  static_cast<unsigned long long>(c.worst_seed));
    out << line;
    failed += c.passed() ? 0 : 1;
    seconds += c.seconds;
  }
  out << outcomes.size() - failed << " of " << outcomes.size() << " cases passed over " << o.seeds << " seeds in "
      << fmt(seconds, 3) << " s\n";
  if (!o.out.empty()) diagnostics::battery_table(outcomes).save(o.out);
  return failed == 0 ? 0 : 1;
}

}  // namespace postfilter::cli
