#include "wave/ablation.hpp"

#include <fstream>
#include <sstream>

#include "wave/errors.hpp"
#include "wave/evaluate.hpp"

namespace wave {

const AblationRow& AblationTable::row(FusionStrategy strategy, const std::string& setting) const {
  for (const auto& r : rows) {
    if (r.strategy == strategy && r.setting == setting) return r;
  }
  throw ArgumentError("no ablation row for " + std::string(to_string(strategy)) + "/" + setting);
}

std::string AblationTable::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "strategy,setting,pool_size,queries,hits,r1,chance,p_value,beats_chance\n";
  for (const auto& r : rows) {
    os << to_string(r.strategy) << ',' << r.setting << ',' << r.pool_size << ',' << r.queries << ',' << r.hits
       << ',' << r.r1 << ',' << r.chance << ',' << r.p_value << ',' << (r.beats_chance ? "yes" : "no") << '\n';
  }
  os << "# significance: one-sided binomial test against chance at alpha " << alpha << '\n';
  os << "# large-scale reference, context only and not reproduced here: "
        "last_layer 49.6 vs mlp_fusion 50.5 average R@1\n";
  return os.str();
}

void AblationTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_csv();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

AblationTable run_fusion_ablation(const AblationSetup& setup, const Dataset& dataset,
                                  const std::vector<FusionStrategy>& strategies,
                                  const std::function<void(FusionStrategy, const std::vector<LossPoint>&)>& on_trained) {
  AblationTable table;
  const std::pair<const char*, const char*> settings[] = {
      {"visual", "text_to_visual_stripped"},
      {"audio_visual", "text_to_audio_visual"},
  };
  for (FusionStrategy strategy : strategies) {
    ModelConfig cfg = setup.model;
    cfg.fusion_strategy = strategy;
    WaveModel model(cfg, setup.lora, setup.model_seed);
    const auto trace = train(model, dataset, setup.train, setup.objective);
    if (on_trained) on_trained(strategy, trace);
    for (const auto& [setting, direction] : settings) {
      const auto m = evaluate_retrieval(model, dataset, direction_by_name(direction));
      AblationRow row;
      row.strategy = strategy;
      row.setting = setting;
      row.pool_size = m.pool_size;
      row.queries = m.queries;
      row.hits = m.hits_at_1;
      row.r1 = m.r1;
      row.chance = 1.0 / static_cast<double>(m.pool_size);
      row.p_value = binomial_upper_tail(m.hits_at_1, m.queries, row.chance);
      row.beats_chance = row.p_value < table.alpha;
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace wave
