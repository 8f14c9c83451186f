import pytest

from launchport.clusters import default_profiles
from launchport.intent import JobSpec
from launchport.repair import SimHarness, default_fingerprints, default_repair_table
from launchport.simcluster import default_fault_rules
from launchport.templates import default_templates
from launchport.types import Framework, Launcher, Strategy

TABLE_DESCRIPTION = (
    "I want to train ViT using torchrun with 8 GPUs across 2 compute nodes on {cluster}, "
    "my training file is run_image_classification.py and my training arguments is ..."
)

PERLMUTTER_COMMAND = (
    "srun -N 2 -n 8 bash -c 'torchrun --nnodes=2 --nproc_per_node=4 "
    "--node_rank=$SLURM_PROCID --master_addr=$MASTER_ADDR --master_port=29400 "
    "run_image_classification.py ...'"
)

POLARIS_COMMAND = (
    "sort -u $PBS_NODEFILE > hostfiles.txt && mpiexec -n 8 -ppn 4 "
    "-hostfile hostfiles.txt -genv MASTER_ADDR $(head -n 1 hostfiles.txt) "
    "-genv MASTER_PORT 29500 python -u run_image_classification.py ..."
)

# The four strategy columns of the cross-platform verification grid.
MATRIX_COMBOS = {
    "ddp": (Framework.PYTORCH, Strategy.DDP),
    "fsdp": (Framework.PYTORCH, Strategy.FSDP),
    "zero3": (Framework.DEEPSPEED, Strategy.ZERO3),
    "acc-ddp": (Framework.ACCELERATE, Strategy.DDP),
}

UNRESOLVABLE_CELLS = {("vista", "zero3"), ("aurora", "acc-ddp"), ("deltaai", "zero3")}


@pytest.fixture(scope="session")
def profiles():
    return default_profiles()


@pytest.fixture(scope="session")
def templates():
    return default_templates()


@pytest.fixture(scope="session")
def fault_rules():
    return default_fault_rules()


@pytest.fixture(scope="session")
def fingerprints():
    return default_fingerprints()


@pytest.fixture(scope="session")
def repair_table():
    return default_repair_table()


@pytest.fixture(scope="session")
def harness(fault_rules):
    return SimHarness(fault_rules)


def make_spec(profile, framework, strategy, launcher=None, **overrides):
    """A profile-legal JobSpec for tests; launcher follows the framework."""
    if launcher is None:
        launcher = {
            Framework.PYTORCH: profile.default_launcher,
            Framework.DEEPSPEED: Launcher.DEEPSPEED,
            Framework.ACCELERATE: Launcher.ACCELERATE,
        }[framework]
    fields = dict(
        cluster=profile.id,
        framework=framework,
        strategy=strategy,
        launcher=launcher,
        nodes=2,
        gpus_per_node=profile.gpus_per_node,
        entry_script="train_gpt2.py",
    )
    if framework is Framework.DEEPSPEED:
        fields["deepspeed_config"] = "ds_config.json"
    fields.update(overrides)
    return JobSpec(**fields)


def matrix_specs(profiles):
    """All 36 (cell name, spec, profile) entries of the verification grid."""
    cells = []
    for profile in sorted(profiles, key=lambda p: p.id):
        for combo, (framework, strategy) in MATRIX_COMBOS.items():
            cells.append((f"{profile.id}/{combo}", make_spec(profile, framework, strategy), profile))
    return cells
