#include "run_config.hpp"

#include "postfilter/autodiff/tensor.hpp"
#include "postfilter/io/files.hpp"

namespace postfilter::cli {

using nlohmann::json;

trainer::TrainConfig preset_config(const std::string& name) {
  if (name == "desk") return trainer::desk_config();
  if (name == "full") return trainer::TrainConfig{};
  throw ContractViolation("unknown preset '" + name + "' (expected desk or full)");
}

namespace {

std::string storage_name(trainer::StorageType s) { return s == trainer::StorageType::f32 ? "f32" : "f64"; }

trainer::StorageType parse_storage(const std::string& s) {
  if (s == "f64") return trainer::StorageType::f64;
  if (s == "f32") return trainer::StorageType::f32;
  throw ContractViolation("output.checkpoint_storage: expected f64 or f32, got '" + s + "'");
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"preset", c.preset},
          {"train", c.train},
          {"corpus", {{"x_dir", c.x_dir.string()}, {"y_dir", c.y_dir.string()}}},
          {"output", {{"dir", c.output_dir.string()}, {"checkpoint_storage", storage_name(c.storage)}}}};
}

RunConfig run_config_from_json(const json& j) {
  trainer::require_known_keys(j, {"preset", "train", "corpus", "output"}, "");
  RunConfig c;
  if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
  c.train = preset_config(c.preset);
  if (j.contains("train")) {
    json merged = c.train;
    merged.merge_patch(j.at("train"));
    c.train = merged.get<trainer::TrainConfig>();
  }
  if (j.contains("corpus")) {
    const auto& k = j.at("corpus");
    trainer::require_known_keys(k, {"x_dir", "y_dir"}, "corpus");
    if (k.contains("x_dir")) c.x_dir = k.at("x_dir").get<std::string>();
    if (k.contains("y_dir")) c.y_dir = k.at("y_dir").get<std::string>();
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    trainer::require_known_keys(o, {"dir", "checkpoint_storage"}, "output");
    if (o.contains("dir")) c.output_dir = o.at("dir").get<std::string>();
    if (o.contains("checkpoint_storage")) c.storage = parse_storage(o.at("checkpoint_storage").get<std::string>());
  }
  c.train.validate();
  return c;
}

void apply_override(json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ContractViolation("override '" + std::string(assignment) + "' is not of the form dotted.key=value");
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key))
      throw ContractViolation("unknown config key '" + path.substr(0, dot == std::string::npos ? path.size() : dot) + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

RunConfig resolve_run_config(const std::string& preset, const std::filesystem::path& file,
                             const std::vector<std::string>& overrides) {
  RunConfig base;
  base.preset = preset;
  base.train = preset_config(preset);
  json j = to_json(base);
  if (!file.empty()) {
    json patch = json::parse(io::read_file(file), nullptr, false);
    if (patch.is_discarded() || !patch.is_object())
      throw ContractViolation(file.string() + ": not a JSON object");
    trainer::require_known_keys(patch, {"preset", "train", "corpus", "output"}, "");
    if (patch.contains("preset") && patch.at("preset") != j.at("preset")) {
      // A file may pick its own preset; its other keys apply on top of that.
      base.preset = patch.at("preset").get<std::string>();
      base.train = preset_config(base.preset);
      j = to_json(base);
    }
    // Unknown keys must fail, so check them before merging silently adds them.
    std::vector<std::string> unknown;
    std::function<void(const json&, const json&, const std::string&)> walk = [&](const json& p, const json& b,
                                                                                 const std::string& where) {
      for (const auto& [key, value] : p.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!b.contains(key)) {
          unknown.push_back(path);
          continue;
        }
        if (value.is_object() && b.at(key).is_object()) walk(value, b.at(key), path);
      }
    };
    walk(patch, j, "");
    if (!unknown.empty()) throw ContractViolation("unknown config key '" + unknown.front() + "'");
    j.merge_patch(patch);
  }
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

}  // namespace postfilter::cli
