#include "cli.hpp"

#include <CLI11.hpp>

#include "commands.hpp"
#include "postfilter/autodiff/tensor.hpp"
#include "postfilter/io/files.hpp"
#include "postfilter/trainer/trainer.hpp"

namespace postfilter::cli {

namespace {

void add_target_options(CLI::App* cmd, TargetOptions& t) {
  cmd->add_option("--target", t.target, "Built-in network: v1-random, v2-random, naive-updown, identity");
  cmd->add_option("--checkpoint", t.checkpoint, "Checkpoint directory instead of a built-in target");
  cmd->add_option("--direction", t.direction, "Generator of the checkpoint: xy or yx")->capture_default_str();
  cmd->add_flag("--linear", t.linear, "Bypass nonlinearities of a random generator");
  cmd->add_option("--seed", t.seed, "Seed of random weights and probe signals")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-domain neural post-filter: corpus tools, cycle-consistent adversarial training, conversion, "
               "evaluation and diagnostics.",
               "postfilter"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Write a corpus of speech-like test utterances");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--count", synth.count)->capture_default_str();
  c_synth->add_option("--seconds", synth.seconds, "Length of each utterance")->capture_default_str();
  c_synth->add_option("--sample-rate", synth.sample_rate)->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();

  DegradeOptions degrade;
  auto* c_degrade = app.add_subcommand("degrade", "Build the degraded domain X from natural WAVs");
  c_degrade->add_option("--in", degrade.in, "Directory of mono WAVs")->required();
  c_degrade->add_option("--out", degrade.out, "Output directory")->required();
  c_degrade->add_option("--kind", degrade.kind, "lowpass or smooth_spectral")->capture_default_str();
  c_degrade->add_option("--cutoff", degrade.cutoff_hz, "Lowpass cutoff in Hz")->capture_default_str();
  c_degrade->add_option("--taps", degrade.taps, "Lowpass FIR length")->capture_default_str();
  c_degrade->add_option("--frame-len", degrade.frame_len)->capture_default_str();
  c_degrade->add_option("--hop", degrade.hop)->capture_default_str();
  c_degrade->add_option("--width", degrade.width, "Moving-average width in frames (odd)")->capture_default_str();
  c_degrade->add_flag("--pcm16", degrade.pcm16, "Write 16-bit PCM instead of float32");

  TrainOptions train;
  fs::path x_dir, y_dir, out_dir;
  auto* c_train = app.add_subcommand("train", "Train both generators and their critics");
  c_train->add_option("--preset", train.preset, "desk or full")->capture_default_str();
  c_train->add_option("--config", train.config, "JSON run config applied over the preset");
  c_train->add_option("--set", train.overrides, "dotted.key=value override, repeatable");
  c_train->add_option("--x", x_dir, "Corpus X directory (corpus.x_dir)");
  c_train->add_option("--y", y_dir, "Corpus Y directory (corpus.y_dir)");
  c_train->add_option("--out", out_dir, "Run directory (output.dir)");
  c_train->add_option("--resume", train.resume, "Continue from this checkpoint directory");

  ConvertOptions convert;
  auto* c_convert = app.add_subcommand("convert", "Apply a trained generator to WAV files");
  c_convert->add_option("--checkpoint", convert.checkpoint)->required();
  c_convert->add_option("--in", convert.in, "WAV file or directory")->required();
  c_convert->add_option("--out", convert.out, "WAV file or directory")->required();
  c_convert->add_option("--direction", convert.direction, "xy or yx")->capture_default_str();
  c_convert->add_option("--chunk", convert.chunk, "Samples per streamed chunk, 0 for whole files")
      ->capture_default_str();
  c_convert->add_flag("--pcm16", convert.pcm16);
  c_convert->add_flag("--normalize", convert.normalize, "Peak-normalise each output to 0.99");

  EvaluateOptions evaluate;
  auto* c_evaluate = app.add_subcommand("evaluate", "LSD and modulation-spectrum difference against references");
  c_evaluate->add_option("--ref", evaluate.ref, "Reference WAV directory")->required();
  c_evaluate->add_option("--deg", evaluate.deg, "Directory to score")->required();
  c_evaluate->add_option("--out", evaluate.out, "Directory for the CSV reports")->required();
  c_evaluate->add_option("--metrics", evaluate.metrics, "lsd, msd")->delimiter(',')->capture_default_str();

  ProbeOptions probe;
  auto* c_probe = app.add_subcommand("probe", "Aliasing and shift-equivariance diagnostics");
  c_probe->add_option("kind", probe.kind, "alias or shift")->required();
  add_target_options(c_probe, probe.target);
  c_probe->add_option("--tone", probe.tone_hz, "Probe tone in Hz")->capture_default_str();
  c_probe->add_option("--sample-rate", probe.sample_rate, "Rate for built-in targets")->capture_default_str();
  c_probe->add_option("--duration", probe.duration_s, "Tone length in seconds")->capture_default_str();
  c_probe->add_option("--max-shift", probe.max_shift)->capture_default_str();
  c_probe->add_option("--length", probe.length, "Noise length for the shift probe")->capture_default_str();
  c_probe->add_option("--out", probe.out, "CSV output");

  BenchOptions bench;
  auto* c_bench = app.add_subcommand("bench", "Generator throughput");
  add_target_options(c_bench, bench.target);
  c_bench->add_option("--seconds", bench.seconds, "Audio length per run")->capture_default_str();
  c_bench->add_option("--threads", bench.threads)->capture_default_str();
  c_bench->add_option("--runs", bench.runs, "Runs; the median is reported")->capture_default_str();
  c_bench->add_option("--chunk", bench.chunk, "Streamed chunk length in samples, 0 for whole utterances")
      ->capture_default_str();
  c_bench->add_option("--sample-rate", bench.sample_rate, "Rate for built-in targets")->capture_default_str();
  c_bench->add_option("--out", bench.out, "CSV output");

  GradcheckOptions gradcheck;
  auto* c_gradcheck = app.add_subcommand("gradcheck", "Run the autodiff gradient-check battery");
  c_gradcheck->add_option("--seeds", gradcheck.seeds)->capture_default_str();
  c_gradcheck->add_option("--first-seed", gradcheck.first_seed)->capture_default_str();
  c_gradcheck->add_option("--filter", gradcheck.filter, "Only cases whose name starts with this");
  c_gradcheck->add_option("--out", gradcheck.out, "CSV output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (c_synth->parsed()) return cmd_synth(synth, out);
    if (c_degrade->parsed()) return cmd_degrade(degrade, out, err);
    if (c_train->parsed()) {
      if (!x_dir.empty()) train.overrides.push_back("corpus.x_dir=" + nlohmann::json(x_dir.string()).dump());
      if (!y_dir.empty()) train.overrides.push_back("corpus.y_dir=" + nlohmann::json(y_dir.string()).dump());
      if (!out_dir.empty()) train.overrides.push_back("output.dir=" + nlohmann::json(out_dir.string()).dump());
      return cmd_train(train, out, err);
    }
    if (c_convert->parsed()) return cmd_convert(convert, out, err);
    if (c_evaluate->parsed()) return cmd_evaluate(evaluate, out, err);
    if (c_probe->parsed()) return cmd_probe(probe, out);
    if (c_bench->parsed()) return cmd_bench(bench, out);
    if (c_gradcheck->parsed()) return cmd_gradcheck(gradcheck, out);
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const trainer::CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace postfilter::cli
