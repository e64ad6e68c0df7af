#include "kontext/hmm_io.hpp"

#include <json.hpp>

#include "kontext/error.hpp"

namespace kontext {

using json = nlohmann::ordered_json;

std::string hmm_to_json(Hmm const &h, int indent)
{
  json root;
  root["states"]        = h.states();
  root["inputs"]        = h.inputs();
  root["outputs"]       = h.outputs();
  root["initial_state"] = h.initial_state();
  auto rows             = [](Eigen::MatrixXd const &m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c)
      {
        row.push_back(m(r, c));
      }
      out.push_back(std::move(row));
    }
    return out;
  };
  json emission   = json::array();
  json transition = json::array();
  for (int x = 0; x < h.inputs(); ++x)
  {
    emission.push_back(rows(h.emission(x)));
    json per_output = json::array();
    for (int o = 0; o < h.outputs(); ++o)
    {
      per_output.push_back(rows(h.transition(x, o)));
    }
    transition.push_back(std::move(per_output));
  }
  root["emission"]   = std::move(emission);
  root["transition"] = std::move(transition);
  return root.dump(indent) + "\n";
}

Hmm hmm_from_json(std::string const &text)
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
    Hmm  h(root.at("states").get<int>(), root.at("inputs").get<int>(), root.at("outputs").get<int>());
    auto fill = [](Eigen::MatrixXd &m, json const &rows) {
      if (rows.size() != static_cast<std::size_t>(m.rows()))
      {
        throw InvalidModel("HMM matrix has the wrong number of rows");
      }
      for (Eigen::Index r = 0; r < m.rows(); ++r)
      {
        auto const &row = rows.at(static_cast<std::size_t>(r));
        if (row.size() != static_cast<std::size_t>(m.cols()))
        {
          throw InvalidModel("HMM matrix row has the wrong length");
        }
        for (Eigen::Index c = 0; c < m.cols(); ++c)
        {
          m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
      }
    };
    for (int x = 0; x < h.inputs(); ++x)
    {
      fill(h.emission(x), root.at("emission").at(static_cast<std::size_t>(x)));
      for (int o = 0; o < h.outputs(); ++o)
      {
        fill(h.transition(x, o),
             root.at("transition").at(static_cast<std::size_t>(x)).at(static_cast<std::size_t>(o)));
      }
    }
    h.set_initial_state(root.value("initial_state", 0));
    if (h.normalization_error() > 1e-9)
    {
      throw InvalidModel("HMM rows must be probability distributions");
    }
    return h;
  }
  catch (json::exception const &e)
  {
    throw ParseError(e.what(), 1);
  }
}

}  // namespace kontext
