#include "riskval/mdp_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "riskval/errors.hpp"

namespace riskval {

using nlohmann::json;

std::string mdp_to_json(const FiniteMdp& mdp) {
  json doc;
  doc["num_states"] = mdp.num_states();
  doc["num_actions"] = mdp.num_actions();
  doc["initial_state"] = mdp.initial_state();
  doc["horizon"] = mdp.horizon();
  json terminal = json::array();
  json transitions = json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) terminal.push_back(s);
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      for (const Transition& t : mdp.outcomes(s, a)) transitions.push_back(json::array({s, a, t.next, t.probability, t.reward}));
    }
  }
  doc["terminal"] = std::move(terminal);
  doc["transitions"] = std::move(transitions);
  return doc.dump(1);
}

FiniteMdp mdp_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("MDP fixture is not valid JSON: ") + e.what());
  }
  try {
    MdpBuilder builder(doc.at("num_states").get<std::size_t>(), doc.at("num_actions").get<std::size_t>(),
                       doc.at("horizon").get<std::size_t>(), doc.at("initial_state").get<std::size_t>());
    for (const auto& s : doc.at("terminal")) builder.terminal(s.get<std::size_t>());
    for (const auto& row : doc.at("transitions")) {
      if (!row.is_array() || row.size() != 5) throw InputError("transition rows must be [state, action, next, probability, reward]");
      builder.add(row[0].get<std::size_t>(), row[1].get<std::size_t>(), row[2].get<std::size_t>(), row[3].get<double>(),
                  row[4].get<double>());
    }
    return builder.build();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed MDP fixture: ") + e.what());
  }
}

void save_mdp(const FiniteMdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << mdp_to_json(mdp) << '\n';
}

FiniteMdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return mdp_from_json(buf.str());
}

}  // namespace riskval
