#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedcbmir/cli/commands.hpp"
#include "fedcbmir/cli/serve.hpp"

using fedcbmir::cli::RunConfig;

namespace {

void paths(CLI::App* app, RunConfig& c, std::initializer_list<const char*> which) {
  for (std::string w : which) {
    if (w == "manifest") app->add_option("--manifest", c.manifest, "dataset manifest (CSV)");
    if (w == "model") app->add_option("--model", c.model, "model file (FCWB + .config.json)");
    if (w == "index") app->add_option("--index", c.index, "feature index file");
    if (w == "out") app->add_option("--out", c.out, "output path");
    if (w == "init") app->add_option("--init", c.init, "start from this model instead of a fresh one");
  }
}

void training(CLI::App* app, RunConfig& c) {
  app->add_option("--lr", c.lr, "learning rate")->capture_default_str();
  app->add_option("--batch", c.batch, "minibatch size")->capture_default_str();
  app->add_option("--optimizer", c.optimizer, "adam or sgd")->capture_default_str();
  app->add_option("--image-size", c.image_size, "input side length (default: from the data)");
  app->add_option("--seed", c.seed, "run seed")->capture_default_str();
}

void federation(CLI::App* app, RunConfig& c) {
  app->add_option("--rounds", c.rounds, "federated rounds")->capture_default_str();
  app->add_option("--local-epochs", c.local_epochs, "local epochs per round")->capture_default_str();
  app->add_option("--strategy", c.strategy, "fedavg or fedadagrad")->capture_default_str();
  app->add_option("--server-lr", c.server_lr, "FedAdagrad server step size")->capture_default_str();
  app->add_option("--tau", c.tau, "FedAdagrad adaptivity")->capture_default_str();
}

void search_opts(CLI::App* app, RunConfig& c) {
  app->add_option("--k", c.k, "hits per query (per group for sen2)")->capture_default_str();
  app->add_option("--scenario", c.scenario, "sen1 or sen2")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated CAE training and content-based image retrieval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FEDCBMIR_VERSION);
  RunConfig c;

  auto* synth = app.add_subcommand("synth", "write a synthetic multi-client dataset");
  paths(synth, c, {"out"});
  synth->add_option("--seed", c.seed)->capture_default_str();
  synth->add_option("--clients", c.clients)->capture_default_str();
  synth->add_option("--train", c.train_count, "training images per client")->capture_default_str();
  synth->add_option("--validation", c.validation_count)->capture_default_str();
  synth->add_option("--test", c.test_count)->capture_default_str();
  synth->add_option("--image-size", c.image_size, "side length (default 32)");

  auto* train_local = app.add_subcommand("train-local", "train one client's CAE without federation");
  paths(train_local, c, {"manifest", "model", "init"});
  train_local->add_option("--epochs", c.epochs)->capture_default_str();
  training(train_local, c);

  auto* fed_sim = app.add_subcommand("fed-sim", "in-process federation, one client per center");
  paths(fed_sim, c, {"manifest", "model", "init"});
  training(fed_sim, c);
  federation(fed_sim, c);

  auto* fed_server = app.add_subcommand("fed-server", "federation server over TCP");
  paths(fed_server, c, {"manifest", "model", "init"});
  training(fed_server, c);
  federation(fed_server, c);
  fed_server->add_option("--listen", c.listen, "host:port (port 0 picks one)")->capture_default_str();
  fed_server->add_option("--roster", c.roster, "client ids when no manifest is given")->delimiter(',');
  fed_server->add_option("--port-file", c.port_file, "write the bound port here");
  fed_server->add_option("--join-timeout", c.join_timeout, "seconds")->capture_default_str();
  fed_server->add_option("--round-timeout", c.round_timeout, "seconds")->capture_default_str();

  auto* fed_client = app.add_subcommand("fed-client", "federation participant over TCP");
  paths(fed_client, c, {"manifest", "out"});
  training(fed_client, c);
  fed_client->add_option("--local-epochs", c.local_epochs)->capture_default_str();
  fed_client->add_option("--server", c.server, "host:port")->capture_default_str();
  fed_client->add_option("--client-id", c.client_id, "this client's center name");
  fed_client->add_option("--join-timeout", c.join_timeout, "seconds to keep retrying the connection")
      ->capture_default_str();

  auto* index = app.add_subcommand("index", "encode the train and validation splits into an index");
  paths(index, c, {"manifest", "model", "out"});

  auto* query = app.add_subcommand("query", "top-K search for one image");
  paths(query, c, {"model", "index", "out"});
  search_opts(query, c);
  query->add_option("--image", c.image, "query image (PNG or PPM)");
  query->add_option("--magnification", c.magnification, "query magnification (40, 100, 200, 400)");
  query->add_option("--label", c.label, "true label, for match markers");

  auto* eval = app.add_subcommand("eval", "retrieval-as-classification on the test split");
  paths(eval, c, {"manifest", "model", "index", "out"});
  search_opts(eval, c);
  eval->add_option("--rule", c.rule, "majority or top1")->capture_default_str();

  auto* serve = app.add_subcommand("serve", "HTTP query service");
  paths(serve, c, {"model", "index", "manifest"});
  serve->add_option("--listen", c.listen, "host:port")->capture_default_str();
  serve->add_option("--data-root", c.data_root, "dataset directory for thumbnails");
  serve->add_option("--static-dir", c.static_dir, "static files served at /");
  serve->add_option("--port-file", c.port_file, "write the bound port here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fedcbmir::cli::kConfig;
  }

  using namespace fedcbmir::cli;
  auto* sub = app.get_subcommands().front();
  c.command = sub->get_name();
  auto& out = std::cout;
  return run_guarded(
      [&]() -> int {
        if (c.command == "synth") return cmd_synth(c, out);
        if (c.command == "train-local") return cmd_train_local(c, out);
        if (c.command == "fed-sim") return cmd_fed_sim(c, out);
        if (c.command == "fed-server") return cmd_fed_server(c, out);
        if (c.command == "fed-client") return cmd_fed_client(c, out);
        if (c.command == "index") return cmd_index(c, out);
        if (c.command == "query") return cmd_query(c, out);
        if (c.command == "eval") return cmd_eval(c, out);
        return cmd_serve(c, out);
      },
      std::cerr);
}
