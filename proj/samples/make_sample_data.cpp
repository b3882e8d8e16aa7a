// Writes pool.csv, labels.csv and train.csv for the command-line walkthrough.

#include <fstream>
#include <iostream>
#include <string>

#include "actinf/actinf.hpp"

using namespace actinf;

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : ".";
  SyntheticSpec spec;
  spec.kind = SyntheticKind::kHeteroLinear;
  spec.n = 1000;
  spec.n_hist = 200;
  const auto d = gen_synthetic(spec, RngSpec{7});

  std::ofstream pool(dir + "/pool.csv"), labels(dir + "/labels.csv"), train(dir + "/train.csv");
  pool << "x0,x1,f,err\n";
  labels << "row,y\n";
  for (std::size_t i = 0; i < d.pool.size(); ++i) {
    const auto& e = d.pool[i];
    csv::write_row(pool, e.x[0], e.x[1], *e.f, *e.err);
    csv::write_row(labels, i + 1, *d.hidden[i]);
  }
  train << "x0,x1,y\n";
  for (const auto& p : d.historical) csv::write_row(train, p.x[0], p.x[1], p.y);
  std::cout << "wrote pool.csv, labels.csv, train.csv to " << dir << '\n';
}
