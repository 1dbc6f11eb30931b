"""Training loop and gradient verification for the recurrent policy.

Each dialog is one minibatch: a full forward/backward pass through every
timestep followed by a single clipped Adam update. Training stops at 100%
per-turn accuracy (measured with a dedicated evaluation pass, so the final
parameters really do reproduce every label) or at max_epochs.
"""

from __future__ import annotations

import numpy as np

from ..compiler.dialogs import ActionTemplate, TrainingDialog
from ..compiler.masks import ActionMask, allowed_templates
from ..entities import EMPTY_MEMORY, ground
from ..errors import DivergedError, LabelOutOfRangeError
from ..flow.model import EntityDef
from . import network
from .featurizer import Featurizer, build_featurizer
from .model import Hyperparams, PolicyModel
from .network import AdamOptimizer, Step, clip_global_norm, param_shapes


def dialog_steps(dialog: TrainingDialog, featurizer: Featurizer,
                 masks: list[ActionMask]) -> list[Step]:
    """Replay a dialog symbolically into per-action training steps.

    Entity memory is folded forward from the labeled mentions, so each step
    carries the same mask state the policy will see at inference time. The
    labeled action is always admitted: a teacher's label outranks the mask.
    """
    template_count = featurizer.template_count
    memory = EMPTY_MEMORY
    last_action: int | None = None
    steps: list[Step] = []
    for turn_index, turn in enumerate(dialog.turns):
        utterance = turn.user.text if turn.user else ""
        if turn.user is not None:
            memory = ground(list(turn.user.mentions), memory, turn_index)
        token_indexes = tuple(featurizer.token_indexes(utterance))
        bow = np.zeros(featurizer.vocab_size)
        bow[list(token_indexes)] = 1.0
        flags = np.zeros(featurizer.entity_count)
        for name in memory.names():
            idx = featurizer.entity_order.get(name)
            if idx is not None:
                flags[idx] = 1.0
        allowed_ids = allowed_templates(masks, memory)
        for action in turn.system:
            label = action.template_id
            if not 0 <= label < template_count:
                raise LabelOutOfRangeError(
                    f"dialog '{dialog.id}' labels template {label}, "
                    f"catalog has {template_count}")
            one_hot = np.zeros(template_count + 1)
            one_hot[template_count if last_action is None else last_action] = 1.0
            allowed = np.zeros(template_count, dtype=bool)
            allowed[sorted(allowed_ids)] = True
            allowed[label] = True
            steps.append(Step(token_indexes=token_indexes,
                              static_features=np.concatenate([bow, flags, one_hot]),
                              label=label, allowed=allowed))
            last_action = label
    return steps


def train(dialogs: list[TrainingDialog], templates: list[ActionTemplate],
          masks: list[ActionMask], entities: list[EntityDef],
          hyper: Hyperparams | None = None,
          version: int = 1) -> tuple[PolicyModel, dict]:
    hyper = hyper or Hyperparams()
    featurizer = build_featurizer(dialogs, entities, templates,
                                  embedding_dim=hyper.embedding_dim)
    per_dialog = [dialog_steps(d, featurizer, masks) for d in dialogs]
    per_dialog = [steps for steps in per_dialog if steps]
    if not per_dialog:
        from ..errors import EmptyCorpusError
        raise EmptyCorpusError("no labeled actions in the training dialogs")

    init_rng = np.random.default_rng([hyper.seed, 0])
    shuffle_rng = np.random.default_rng([hyper.seed, 1])
    params = network.init_params(featurizer.vocab_size, hyper.embedding_dim,
                                 hyper.hidden_size, featurizer.template_count,
                                 featurizer.input_size, init_rng)
    optimizer = AdamOptimizer(params, learning_rate=hyper.learning_rate)

    epochs_run = 0
    final_loss = float("inf")
    accuracy = 0.0
    loss_history: list[float] = []
    for _ in range(hyper.max_epochs):
        epochs_run += 1
        order = shuffle_rng.permutation(len(per_dialog))
        loss_sum = 0.0
        step_count = 0
        correct = 0
        for index in order:
            steps = per_dialog[index]
            loss, grads, predictions = network.run_dialog(
                params, steps, hyper.hidden_size, hyper.embedding_dim)
            clip_global_norm(grads, hyper.clip_norm)
            optimizer.update(params, grads)
            loss_sum += loss
            step_count += len(steps)
            correct += sum(int(p == s.label) for p, s in zip(predictions, steps))
        final_loss = loss_sum / step_count
        loss_history.append(float(final_loss))
        if not np.isfinite(final_loss):
            raise DivergedError(f"training loss diverged at epoch {epochs_run}")
        if correct == step_count:
            # confirm on the post-update parameters so the stored model
            # really replays every label
            accuracy = _evaluate(params, per_dialog, hyper)
            if accuracy == 1.0:
                break
    else:
        accuracy = _evaluate(params, per_dialog, hyper)

    model = PolicyModel(featurizer=featurizer, params=params, hyper=hyper,
                        templates=list(templates), masks=list(masks),
                        entities=list(entities), version=version)
    metrics = {"final_loss": float(final_loss), "per_turn_accuracy": float(accuracy),
               "epochs": epochs_run, "dialogs": len(per_dialog),
               "steps": sum(len(s) for s in per_dialog),
               "loss_history": loss_history}
    return model, metrics


def _evaluate(params, per_dialog: list[list[Step]], hyper: Hyperparams) -> float:
    correct = 0
    total = 0
    for steps in per_dialog:
        _, _, predictions = network.run_dialog(params, steps, hyper.hidden_size,
                                               hyper.embedding_dim,
                                               compute_grads=False)
        for step, predicted in zip(steps, predictions):
            correct += int(predicted == step.label)
            total += 1
    return correct / total


def replay_dialog_actions(model: PolicyModel, dialog: TrainingDialog) -> list[list[int]]:
    """Masked-argmax predictions per turn when teacher-forcing a dialog."""
    steps = dialog_steps(dialog, model.featurizer, model.masks)
    _, _, predictions = network.run_dialog(model.params, steps,
                                           model.hyper.hidden_size,
                                           model.hyper.embedding_dim,
                                           compute_grads=False)
    out: list[list[int]] = []
    cursor = 0
    for turn in dialog.turns:
        n = len(turn.system)
        out.append(predictions[cursor:cursor + n])
        cursor += n
    return out


def gradient_check(vocab_size: int = 3, embedding_dim: int = 2,
                   hidden_size: int = 3, template_count: int = 3,
                   entity_count: int = 2, seed: int = 0,
                   zero_params: bool = False) -> float:
    """Compare analytic BPTT gradients against central finite differences.

    Builds a random 3-turn dialog on a tiny shape and differentiates the
    total cross-entropy with respect to every parameter component.
    """
    rng = np.random.default_rng([seed, 2])
    input_size = (embedding_dim + vocab_size + entity_count + template_count + 1)
    shapes = param_shapes(vocab_size, embedding_dim, hidden_size,
                          template_count, input_size)
    if zero_params:
        params = {name: np.zeros(shape) for name, shape in shapes.items()}
    else:
        params = {name: rng.normal(0.0, 0.5, size=shape)
                  for name, shape in shapes.items()}

    steps: list[Step] = []
    last = template_count  # "none"
    static_size = vocab_size + entity_count + template_count + 1
    for _ in range(3):
        n_tokens = int(rng.integers(0, 4))
        token_indexes = tuple(int(i) for i in rng.integers(0, vocab_size, n_tokens))
        bow = np.zeros(vocab_size)
        bow[list(token_indexes)] = 1.0
        flags = (rng.random(entity_count) < 0.5).astype(float)
        one_hot = np.zeros(template_count + 1)
        one_hot[last] = 1.0
        label = int(rng.integers(0, template_count))
        allowed = rng.random(template_count) < 0.7
        allowed[label] = True
        static = np.concatenate([bow, flags, one_hot])
        assert static.shape[0] == static_size
        steps.append(Step(token_indexes=token_indexes, static_features=static,
                          label=label, allowed=allowed))
        last = label

    _, analytic, _ = network.run_dialog(params, steps, hidden_size, embedding_dim)

    # the difference quotient runs in extended precision so cancellation noise
    # cannot drown out legitimately tiny float64 gradient components
    wide = {name: array.astype(np.longdouble) for name, array in params.items()}
    h = np.longdouble(1e-5)
    max_rel = 0.0
    for name in network.PARAM_ORDER:
        flat = wide[name].reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        for i in range(flat.shape[0]):
            original = flat[i]
            flat[i] = original + h
            loss_plus, _, _ = network.run_dialog(wide, steps, hidden_size,
                                                 embedding_dim, compute_grads=False)
            flat[i] = original - h
            loss_minus, _, _ = network.run_dialog(wide, steps, hidden_size,
                                                  embedding_dim, compute_grads=False)
            flat[i] = original
            numeric = float((loss_plus - loss_minus) / (2 * h))
            denom = max(abs(grad_flat[i]), abs(numeric), 1e-8)
            max_rel = max(max_rel, abs(grad_flat[i] - numeric) / denom)
    return max_rel
