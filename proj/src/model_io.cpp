#include "kontext/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kontext/error.hpp"

namespace kontext {

using json = nlohmann::ordered_json;

std::string model_to_json(EmpiricalModel const &model, int indent)
{
  json root;
  root["observables"] = model.num_observables();
  root["outcomes"]    = model.num_outcomes();
  json contexts       = json::array();
  for (std::size_t c = 0; c < model.num_contexts(); ++c)
  {
    auto const &context = model.context(c);
    json        entry;
    entry["id"]          = context.id;
    entry["observables"] = context.observables;
    json dist            = json::array();
    for (auto const &w : model.distribution(c).entries)
    {
      json item;
      item["outcome"] = w.outcome;
      item["p"]       = w.p;
      dist.push_back(std::move(item));
    }
    entry["distribution"] = std::move(dist);
    if (!context.label.empty())
    {
      entry["label"] = context.label;
    }
    if (!context.inputs.empty())
    {
      entry["inputs"] = context.inputs;
    }
    contexts.push_back(std::move(entry));
  }
  root["contexts"] = std::move(contexts);
  return root.dump(indent) + "\n";
}

EmpiricalModel model_from_json(std::string const &text)
{
  json root;
  try
  {
    root = json::parse(text);
  }
  catch (json::parse_error const &e)
  {
    throw ParseError(e.what(), 1);
  }

  try
  {
    std::vector<Context>             contexts;
    std::vector<ContextDistribution> distributions;
    for (auto const &entry : root.at("contexts"))
    {
      Context context;
      context.id          = entry.at("id").get<int>();
      context.observables = entry.at("observables").get<std::vector<ObservableId>>();
      if (entry.contains("label"))
      {
        context.label = entry.at("label").get<std::vector<int>>();
      }
      if (entry.contains("inputs"))
      {
        context.inputs = entry.at("inputs").get<std::vector<int>>();
      }
      ContextDistribution dist;
      for (auto const &item : entry.at("distribution"))
      {
        dist.entries.push_back({item.at("outcome").get<Outcome>(), item.at("p").get<double>()});
      }
      contexts.push_back(std::move(context));
      distributions.push_back(std::move(dist));
    }
    return EmpiricalModel(root.at("observables").get<int>(), root.at("outcomes").get<int>(),
                          std::move(contexts), std::move(distributions));
  }
  catch (json::exception const &e)
  {
    throw ParseError(std::string("malformed model: ") + e.what(), 1);
  }
}

std::string read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw Error("cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

EmpiricalModel load_model(std::filesystem::path const &path)
{
  return model_from_json(read_file(path));
}

void write_file_atomically(std::filesystem::path const &path, std::string const &contents)
{
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      throw Error("cannot write " + tmp.string());
    }
    out << contents;
    out.flush();
    if (!out)
    {
      throw Error("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace kontext
