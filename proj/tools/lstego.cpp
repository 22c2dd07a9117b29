// Command-line front end: training, embedding, extraction, evaluation,
// corruption previews and trade-off sweeps.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lstego/baseline.hpp"
#include "lstego/bench.hpp"
#include "lstego/noise.hpp"
#include "lstego/pipeline.hpp"
#include "lstego/plot.hpp"

namespace fs = std::filesystem;
using namespace lstego;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;  // key=value
};

void add_common(CLI::App* app, Common& c, const std::string& out_help) {
  app->add_option("--config", c.config_path, "JSON config merged over the defaults");
  app->add_option("--seed", c.seed, "Seed override");
  app->add_option("--out", c.out, out_help);
  app->add_option("--set", c.sets, "Config override, section.key=value (repeatable)");
}

Json resolve_config(const Common& c, const char* seed_key) {
  Json cfg = default_config();
  if (!c.config_path.empty()) merge_config_file(cfg, c.config_path);
  apply_env_overrides(cfg);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed && seed_key) set_config_value(cfg, seed_key, std::to_string(*c.seed));
  return cfg;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& p : list_pngs(in)) out.push_back(p);
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

// Learned model (archive) or the handcrafted method, resolved from flags.
struct MethodHandle {
  std::unique_ptr<StegoBundle> bundle;
  bench::Method method;
};

struct MethodFlags {
  std::string model;
  std::string method = "latent";
  int length = 100;
  bool ecc = false;
};

void add_method_flags(CLI::App* app, MethodFlags& f) {
  app->add_option("--model", f.model, "Stego model archive (from train-stega)");
  app->add_option("--method", f.method, "latent | dwtdctsvd")->check(CLI::IsMember({"latent", "dwtdctsvd"}));
  app->add_option("--length", f.length, "Channel bits for dwtdctsvd");
  app->add_flag("--ecc", f.ecc, "Wrap dwtdctsvd payloads in a t=5 BCH code");
}

MethodHandle resolve_method(const MethodFlags& f, const Json& cfg) {
  MethodHandle h;
  if (f.method == "dwtdctsvd") {
    dwtdctsvd::FreqEmbedConfig fc;
    fc.block_size = cfg.at("baseline").at("block_size");
    fc.quant_step = cfg.at("baseline").at("quant_step");
    std::optional<EccConfig> ecc;
    if (f.ecc) {
      ecc = ecc_for_channel(f.length);
      if (!ecc) throw std::invalid_argument("no t=5 BCH code fits " + std::to_string(f.length) + " bits");
    }
    h.method = bench::dwtdctsvd_method(f.length, fc, 0, ecc);
    return h;
  }
  if (f.model.empty()) throw std::runtime_error("configuration error: --model is required for the learned method");
  h.bundle = std::make_unique<StegoBundle>(load_stego_bundle(f.model));
  h.method = bench::learned_method(h.bundle->ae.ae, h.bundle->model);
  return h;
}

SecretPayload parse_secret(const std::string& text, const std::string& hex, const std::string& bits, int data_bits) {
  const int given = !text.empty() + !hex.empty() + !bits.empty();
  if (given != 1) throw std::invalid_argument("give exactly one of --secret, --secret-hex, --secret-bits");
  if (!hex.empty()) return SecretPayload::from_hex(hex, data_bits);
  if (!bits.empty()) {
    auto p = SecretPayload::from_bitstring(bits);
    if (p.size() != data_bits)
      throw std::invalid_argument("bit string has " + std::to_string(p.size()) + " bits, method carries " +
                                  std::to_string(data_bits));
    return p;
  }
  return string_to_bits(text, data_bits);
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

std::string printable(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out += (c >= 32 && c < 127) ? static_cast<char>(c) : '?';
  return out;
}

// ------------------------------------------------------------------ verbs

int cmd_train_ae(const Common& c) {
  const Json cfg = resolve_config(c, "autoencoder.seed");
  const std::string out = c.out.empty() ? "autoencoder.lsa" : c.out;
  auto b = train_ae_bundle(cfg, [](const AeTrainLog& l) {
    std::printf("step %d  loss %.5f  %.0fs\n", l.step, l.loss, l.seconds);
    std::fflush(stdout);
  });
  const auto val = load_split(cfg, Split::val);
  const double p = mean_reconstruction_psnr(b.ae, val);
  save_ae_bundle(out, b, ae_echo(cfg));
  std::printf("held-out reconstruction PSNR %.2f dB over %zu images\nparameters %zu\nwrote %s\n", p, val.size(),
              b.ae.parameter_count(), out.c_str());
  return 0;
}

int cmd_train_stega(const Common& c, const std::string& ae_path, const std::string& resume) {
  const Json cfg = resolve_config(c, "stego.seed");
  if (ae_path.empty()) throw std::runtime_error("configuration error: --ae is required");
  const auto ae = load_ae_bundle(ae_path);
  const std::string out = c.out.empty() ? "stego.lsm" : c.out;
  const std::string ckpt = resume.empty() ? out + ".ckpt" : resume;
  auto run = train_stego(cfg, ae, ckpt, out + ".log.csv", !resume.empty(),
                         [](const StepMetrics& m, const TrainState& s) {
                           if (s.step % 50 == 0) {
                             std::printf("step %ld  phase %d  beta %.3f  loss %.4f  bit_acc %.3f  ema %.3f\n", s.step,
                                         static_cast<int>(s.phase), s.beta_current, m.loss, m.bit_acc, s.ema_bit_acc);
                             std::fflush(stdout);
                           }
                         });
  save_stego_bundle(out, ae, run.model, stego_echo(cfg));
  const auto& v = run.result.final_val;
  std::printf("steps %ld%s  val: psnr %.2f  bit_acc clean %.4f noised %.4f\nwrote %s\n", run.result.steps,
              run.result.early_stopped ? " (early stop)" : "", v.psnr, v.bit_acc_clean, v.bit_acc_noised, out.c_str());
  return 0;
}

int cmd_embed(const Common& c, const MethodFlags& mf, const std::vector<std::string>& covers,
              const std::string& text, const std::string& hex, const std::string& bits) {
  const Json cfg = resolve_config(c, nullptr);
  auto h = resolve_method(mf, cfg);
  const auto secret = parse_secret(text, hex, bits, h.method.data_bits);
  const fs::path out = c.out.empty() ? "stego" : c.out;
  fs::create_directories(out);
  Json manifest = {{"method", h.method.name}, {"digest", h.method.digest}, {"secret_hex", secret.to_hex()},
                   {"data_bits", h.method.data_bits}, {"channel_bits", h.method.channel_bits()},
                   {"rows", Json::array()}};
  if (h.method.ecc)
    manifest["ecc"] = {h.method.ecc->codeword_length_n, h.method.ecc->data_length_k, h.method.ecc->correctable_errors_t};
  int errors = 0;
  for (const auto& p : expand_inputs(covers)) {
    Json row = {{"cover", p.string()}};
    try {
      const Image stego = h.method.embed(read_png(p.string()), secret);
      const fs::path dst = out / (p.stem().string() + "_stego.png");
      write_png(dst.string(), stego);
      row["stego"] = dst.string();
      row["status"] = "ok";
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["error"] = e.what();
      ++errors;
    }
    manifest["rows"].push_back(row);
  }
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::printf("%zu covers, %d errors, manifest %s\n", manifest["rows"].size(), errors,
              (out / "manifest.json").string().c_str());
  return errors ? 1 : 0;
}

int cmd_extract(const Common& c, const MethodFlags& mf, const std::vector<std::string>& inputs) {
  const Json cfg = resolve_config(c, nullptr);
  auto h = resolve_method(mf, cfg);
  Json rows = Json::array();
  int errors = 0;
  for (const auto& p : expand_inputs(inputs)) {
    Json row = {{"image", p.string()}};
    try {
      const Image img = read_png(p.string());
      const auto ex = h.method.extract(h.method.prepare(img));
      row["channel_hex"] = ex.channel.to_hex();
      row["secret_hex"] = ex.data.to_hex();
      row["ascii"] = printable(bits_to_string(ex.data));
      row["confidence"] = ex.confidence;
      if (h.method.ecc) row["ecc_corrected"] = ex.ecc_corrected;
      row["status"] = "ok";
      std::printf("%s  %s  \"%s\"  confidence %.3f\n", p.string().c_str(), ex.data.to_hex().c_str(),
                  row["ascii"].get<std::string>().c_str(), ex.confidence);
    } catch (const std::exception& e) {
      row["status"] = "error";
      row["error"] = e.what();
      std::fprintf(stderr, "%s: %s\n", p.string().c_str(), e.what());
      ++errors;
    }
    rows.push_back(row);
  }
  if (!c.out.empty()) write_text(c.out, Json{{"method", h.method.name}, {"rows", rows}}.dump(2) + "\n");
  return errors ? 1 : 0;
}

void per_kind_plot(const bench::EvalReport& rep, const std::string& path) {
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& [k, v] : rep.per_kind_bit_acc()) bars.emplace_back(k, v);
  std::sort(bars.begin(), bars.end(), [](auto& a, auto& b) { return a.second > b.second; });
  write_png(path, plot::bar_chart("bit accuracy by perturbation", bars, 0.5, 1.0));
}

int cmd_evaluate(const Common& c, const MethodFlags& mf, const std::string& data_dir, bool per_kind,
                 const std::string& kind, int severity) {
  const Json cfg = resolve_config(c, "eval.seed");
  auto h = resolve_method(mf, cfg);
  if (mf.method == "dwtdctsvd") h.method.resolution = cfg.at("data").at("resolution");
  std::vector<Image> images;
  std::vector<std::string> ids;
  if (!data_dir.empty()) {
    for (const auto& p : list_pngs(data_dir)) {
      images.push_back(read_png(p.string()));
      ids.push_back(p.filename().string());
    }
  } else {
    images = load_split(cfg, Split::test);
  }
  bench::EvalOptions opt;
  opt.seed = cfg.at("eval").at("seed");
  if (h.bundle) opt.perceptual = &h.bundle->ae.perceptual;
  if (!kind.empty()) opt.fixed = PerturbationSpec{parse_noise_kind(kind), severity};
  const std::string stem = c.out.empty() ? "report" : c.out;
  if (fs::path(stem).has_parent_path()) fs::create_directories(fs::path(stem).parent_path());
  const auto rep = per_kind ? bench::evaluate_per_kind(h.method, images, opt) : bench::evaluate(h.method, images, opt, ids);
  rep.write(stem);
  for (const auto& [k, s] : rep.aggregate()) std::printf("%-15s %.4f +- %.4f\n", k.c_str(), s.mean, s.std);
  if (per_kind) {
    std::printf("\n%-18s %7s %7s %7s %7s %7s %7s\n", "kind", "s1", "s2", "s3", "s4", "s5", "mean");
    const auto tab = bench::severity_table(rep);
    const auto means = rep.per_kind_bit_acc();
    Json j;
    for (const auto& [k, a] : tab) {
      std::printf("%-18s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f\n", k.c_str(), a[1], a[2], a[3], a[4], a[5], means.at(k));
      j[k] = {{"severity", std::vector<double>(a.begin() + 1, a.end())}, {"mean", means.at(k)}};
    }
    write_text(stem + "_per_kind.json", j.dump(2) + "\n");
    per_kind_plot(rep, stem + "_per_kind.png");
  }
  return 0;
}

int cmd_perturb(const Common& c, const std::string& input, const std::string& kind, int severity) {
  const Json cfg = resolve_config(c, nullptr);
  (void)cfg;
  if (c.out.empty()) throw std::invalid_argument("--out is required");
  const Image img = read_png(input);
  const Image out = quantize8(apply_perturbation(img, {parse_noise_kind(kind), severity}, c.seed.value_or(0)));
  write_png(c.out, out);
  std::printf("%s@%d -> %s (psnr %.2f dB)\n", kind.c_str(), severity, c.out.c_str(), psnr(out, img));
  return 0;
}

int cmd_sweep(const Common& c, const std::string& axis, const std::vector<std::string>& values,
              const std::string& ae_path) {
  Json cfg = resolve_config(c, "stego.seed");
  const std::string key = axis == "secret_length" ? "stego.secret_length"
                          : axis == "beta_max"    ? "stego.beta_max"
                          : axis == "train_volume" ? "data.train_count"
                                                   : "";
  if (key.empty()) throw std::invalid_argument("sweep axis must be secret_length, beta_max or train_volume");
  if (values.empty()) throw std::invalid_argument("sweep needs --values");
  if (axis == "train_volume" && !cfg.at("data").at("train_dir").get<std::string>().empty())
    throw std::invalid_argument("train_volume sweeps use the procedural training split");
  const fs::path out = c.out.empty() ? "sweep" : c.out;
  fs::create_directories(out);
  const auto ae = ae_path.empty() ? cached_ae(cfg, (out / "autoencoder.lsa").string()) : load_ae_bundle(ae_path);
  const auto test = load_split(cfg, Split::test);
  Json table = Json::array();
  std::string csv = "value,psnr,ssim,bit_acc_clean,bit_acc_noised,bit_acc_ecc,word_acc,steps\n";
  std::vector<double> xs;
  plot::Series ps{"psnr/40", {}}, bc{"bit acc clean", {}}, bn{"bit acc noised", {}}, ss{"ssim", {}};
  for (const auto& v : values) {
    Json point = cfg;
    set_config_value(point, key, v);
    const std::string path = (out / (axis + "_" + v + ".lsm")).string();
    std::printf("== %s = %s\n", axis.c_str(), v.c_str());
    std::fflush(stdout);
    const auto model = cached_stego(point, ae, path, [](const StepMetrics& m, const TrainState& s) {
      if (s.step % 250 == 0) {
        std::printf("  step %ld phase %d beta %.2f bit_acc %.3f\n", s.step, static_cast<int>(s.phase), s.beta_current,
                    m.bit_acc);
        std::fflush(stdout);
      }
    });
    bench::EvalOptions opt;
    opt.seed = cfg.at("eval").at("seed");
    opt.perceptual = &ae.perceptual;
    const auto rep = bench::evaluate(bench::learned_method(ae.ae, model), test, opt);
    rep.write((out / (axis + "_" + v)).string());
    const auto agg = rep.aggregate();
    const long steps = model.info.value("steps", 0L);
    char line[256];
    std::snprintf(line, sizeof line, "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%ld\n", v.c_str(), agg.at("psnr").mean,
                  agg.at("ssim").mean, agg.at("bit_acc_clean").mean, agg.at("bit_acc_noised").mean,
                  agg.at("bit_acc_ecc").mean, agg.at("word_acc").mean, steps);
    csv += line;
    std::printf("%s", line);
    Json row = {{"value", v}, {"steps", steps}};
    for (const auto& [k, s] : agg) row[k] = {{"mean", s.mean}, {"std", s.std}};
    table.push_back(row);
    xs.push_back(std::stod(v));
    ps.y.push_back(agg.at("psnr").mean / 40.0);
    ss.y.push_back(agg.at("ssim").mean);
    bc.y.push_back(agg.at("bit_acc_clean").mean);
    bn.y.push_back(agg.at("bit_acc_noised").mean);
  }
  write_text(out / ("sweep_" + axis + ".csv"), csv);
  write_text(out / ("sweep_" + axis + ".json"), Json{{"axis", axis}, {"points", table}}.dump(2) + "\n");
  write_png((out / ("sweep_" + axis + ".png")).string(), plot::line_chart("sweep " + axis, axis, xs, {ps, ss, bc, bn}, 0.5, 1.0));
  return 0;
}

int cmd_synth(const std::string& out, std::uint64_t first, int count, int size) {
  if (out.empty()) throw std::invalid_argument("--out is required");
  synth::write_dataset(out, first, count, size);
  std::printf("wrote %d scenes to %s\n", count, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space image steganography toolkit"};
  app.require_subcommand(1);

  Common c_ae, c_st, c_em, c_ex, c_ev, c_pe, c_sw;
  auto* train_ae = app.add_subcommand("train-ae", "Train the reference autoencoder");
  add_common(train_ae, c_ae, "Output archive");

  auto* train_st = app.add_subcommand("train-stega", "Train the secret encoder and decoder");
  add_common(train_st, c_st, "Output model archive");
  std::string ae_path, resume;
  train_st->add_option("--ae", ae_path, "Autoencoder archive from train-ae");
  train_st->add_option("--resume", resume, "Checkpoint to resume from");

  auto* embed = app.add_subcommand("embed", "Hide a secret in cover images");
  add_common(embed, c_em, "Output directory");
  MethodFlags mf_em;
  add_method_flags(embed, mf_em);
  std::vector<std::string> covers;
  std::string text, hex, bits;
  embed->add_option("--cover", covers, "Cover PNG files or directories")->required();
  embed->add_option("--secret", text, "ASCII secret");
  embed->add_option("--secret-hex", hex, "Hexadecimal secret");
  embed->add_option("--secret-bits", bits, "Secret as a 0/1 string");

  auto* extract = app.add_subcommand("extract", "Recover secrets from stego images");
  add_common(extract, c_ex, "JSON results file");
  MethodFlags mf_ex;
  add_method_flags(extract, mf_ex);
  std::vector<std::string> stegos;
  extract->add_option("--input", stegos, "Stego PNG files or directories")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Quality and recovery report");
  add_common(evaluate, c_ev, "Report path stem (.csv/.json)");
  MethodFlags mf_ev;
  add_method_flags(evaluate, mf_ev);
  std::string data_dir, ev_kind;
  int ev_sev = 3;
  bool per_kind = false;
  evaluate->add_option("--data", data_dir, "Image folder (default: configured test split)");
  evaluate->add_flag("--per-kind", per_kind, "Every kind at every severity");
  evaluate->add_option("--kind", ev_kind, "Fixed perturbation kind");
  evaluate->add_option("--severity", ev_sev, "Severity for --kind")->check(CLI::Range(0, 5));

  auto* perturb = app.add_subcommand("perturb", "Apply one corruption to an image");
  add_common(perturb, c_pe, "Output PNG");
  std::string pe_in, pe_kind;
  int pe_sev = 3;
  perturb->add_option("--input", pe_in, "Input PNG")->required();
  perturb->add_option("--kind", pe_kind, "Corruption kind")->required();
  perturb->add_option("--severity", pe_sev, "Severity 0..5")->check(CLI::Range(0, 5));

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate along one axis");
  add_common(sweep, c_sw, "Output directory");
  std::string axis, sw_ae;
  std::vector<std::string> values;
  sweep->add_option("--axis", axis, "secret_length | beta_max | train_volume")->required();
  sweep->add_option("--values", values, "Axis values")->required()->delimiter(',');
  sweep->add_option("--ae", sw_ae, "Autoencoder archive (trained into the output directory when absent)");

  auto* synth_cmd = app.add_subcommand("synth-data", "Write procedural scenes as PNG");
  std::string sy_out;
  std::uint64_t sy_first = 0;
  int sy_count = 100, sy_size = 64;
  synth_cmd->add_option("--out", sy_out, "Output directory")->required();
  synth_cmd->add_option("--first-seed", sy_first, "First scene seed");
  synth_cmd->add_option("--count", sy_count, "Number of scenes");
  synth_cmd->add_option("--size", sy_size, "Side length");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_ae) return cmd_train_ae(c_ae);
    if (*train_st) return cmd_train_stega(c_st, ae_path, resume);
    if (*embed) return cmd_embed(c_em, mf_em, covers, text, hex, bits);
    if (*extract) return cmd_extract(c_ex, mf_ex, stegos);
    if (*evaluate) return cmd_evaluate(c_ev, mf_ev, data_dir, per_kind, ev_kind, ev_sev);
    if (*perturb) return cmd_perturb(c_pe, pe_in, pe_kind, pe_sev);
    if (*sweep) return cmd_sweep(c_sw, axis, values, sw_ae);
    if (*synth_cmd) return cmd_synth(sy_out, sy_first, sy_count, sy_size);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
