"""Command-line interface: train, eval, predict, inspect-weights.

Exit codes: 0 success, 1 usage error, 2 data/model error.
"""

from __future__ import annotations

import json
import math
import sys

import click

from .data import CLASS_NAMES, load_image, scan_dataset
from .errors import ArchiveError, DamageNetError
from .model import build_vgg16_damage, forward, init_conv_parameters
from .train import TrainConfig, evaluate, train, write_history
from .weights_io import import_pretrained, load_archive, load_network_weights, save_archive


@click.group()
def cli():
    """Four-class building-damage classifier: VGG16 features, trainable dense head."""


def _echo_config(pairs: dict) -> None:
    click.echo("config: " + " ".join(f"{k}={v}" for k, v in pairs.items()))


def _infer_input_size(entries) -> int:
    """Recover the training resolution from the dense1 weight shape."""
    for entry in entries:
        if entry.name == "dense1.weight":
            flat = entry.shape[0]
            side = 32 * math.isqrt(flat // 512)
            if 512 * (side // 32) ** 2 != flat:
                raise ArchiveError(f"dense1.weight extent {flat} matches no input size")
            return side
    raise ArchiveError("archive is missing tensor 'dense1.weight'")


def _load_model(archive_path) -> tuple:
    entries = load_archive(archive_path)
    size = _infer_input_size(entries)
    net = build_vgg16_damage(init_seed=0, input_size=size)
    load_network_weights(net, entries)
    return net, size


@cli.command("train")
@click.option("--train-data", required=True, type=click.Path(), help="Training dataset root.")
@click.option("--val-data", required=True, type=click.Path(), help="Validation dataset root.")
@click.option("--pretrained", type=click.Path(), default=None,
              help="Pretrained conv-weight archive (required with --freeze-conv).")
@click.option("--out-model", type=click.Path(), default="model.vggw", show_default=True)
@click.option("--history", "history_path", type=click.Path(), default="history.csv",
              show_default=True)
@click.option("--epochs", default=60, show_default=True)
@click.option("--batch-size", default=20, show_default=True)
@click.option("--lr", default=1e-5, show_default=True)
@click.option("--momentum", default=0.9, show_default=True)
@click.option("--dropout", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--freeze-conv/--no-freeze-conv", default=True, show_default=True)
@click.option("--image-size", default=224, show_default=True,
              help="Square input resolution; must be a multiple of 32.")
def cmd_train(train_data, val_data, pretrained, out_model, history_path, epochs,
              batch_size, lr, momentum, dropout, seed, freeze_conv, image_size):
    """Train the dense head (optionally the whole network) and save the result."""
    try:
        config = TrainConfig(epochs=epochs, batch_size=batch_size, learning_rate=lr,
                             momentum=momentum, dropout_rate=dropout, seed=seed,
                             freeze_conv=freeze_conv, image_size=image_size)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    if freeze_conv and pretrained is None:
        raise click.UsageError("--freeze-conv requires --pretrained (nothing to freeze)")

    _echo_config({**config.to_dict(), "train_data": train_data, "val_data": val_data,
                  "pretrained": pretrained, "out_model": out_model,
                  "history": history_path})

    net = build_vgg16_damage(init_seed=seed, input_size=image_size)
    if pretrained is not None:
        import_pretrained(net, load_archive(pretrained))
    else:
        init_conv_parameters(net, seed=seed)

    train_index = scan_dataset(train_data, split="training")
    val_index = scan_dataset(val_data, split="validation")
    click.echo(f"dataset: train={len(train_index)} val={len(val_index)}")
    click.echo("epoch,train_loss,train_accuracy,val_loss,val_accuracy")

    net, history = train(net, train_index, val_index, config,
                         on_epoch=lambda m: click.echo(m.csv_row()))
    write_history(history, history_path)
    save_archive(net, out_model)
    click.echo(f"saved model to {out_model}, history to {history_path}")


@cli.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--batch-size", default=20, show_default=True)
def cmd_eval(model_path, data_path, batch_size):
    """Evaluate a trained model over a dataset root."""
    _echo_config({"model": model_path, "data": data_path, "batch_size": batch_size})
    net, size = _load_model(model_path)
    index = scan_dataset(data_path, split="validation")
    metrics = evaluate(net, index, batch_size=batch_size, image_size=size)
    click.echo(f"loss={metrics.loss:.6f} accuracy={metrics.accuracy:.4f} "
               f"n={metrics.sample_count}")


@cli.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True, default=False,
              help="Emit a machine-readable JSON report.")
def cmd_predict(model_path, image_path, as_json):
    """Classify one image into the four damage categories."""
    if not as_json:
        _echo_config({"model": model_path, "image": image_path})
    net, size = _load_model(model_path)
    image = load_image(image_path, size=size)
    batch = image.reshape((1,) + image.shape)
    probs = forward(net, batch, mode="inference").probabilities.data[0]
    predicted = CLASS_NAMES[int(probs.argmax())]
    if as_json:
        click.echo(json.dumps({
            "probabilities": {name: round(float(p), 6)
                              for name, p in zip(CLASS_NAMES, probs)},
            "predicted": predicted,
        }))
    else:
        for name, p in zip(CLASS_NAMES, probs):
            click.echo(f"{name} {p:.6f}")
        click.echo(f"predicted: {predicted}")


@cli.command("inspect-weights")
@click.option("--archive", "archive_path", required=True, type=click.Path())
def cmd_inspect_weights(archive_path):
    """List every tensor in an archive and verify its checksum."""
    _echo_config({"archive": archive_path})
    entries = load_archive(archive_path)
    total_values = 0
    for entry in entries:
        click.echo(f"{entry.name} shape={list(entry.shape)} values={entry.values.size}")
        total_values += entry.values.size
    click.echo(f"total: {len(entries)} entries, {total_values} values, checksum ok")


def main(argv=None) -> int:
    """Run the CLI, mapping exceptions onto the 0/1/2 exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except DamageNetError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())
