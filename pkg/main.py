from fastmcp import FastMCP
from typing import Optional, Union
import json
from Tools.ExperimentTools import service
from Prompts.experiment_guide import experiment_guide
from Prompts.audit_rules import audit_rules
from Prompts.quick_reference import quick_reference
from Utilities.logger import configure
from Utilities.settings import RESOURCES_DIR

configure()

# Create a server instance
mcp = FastMCP(name="Modescatter MCP Server")

""" ----- Experiment Tools ----- """
# Tool 1: Validate an experiment config
@mcp.tool
def validate_experiment(
    config_path: str,
    resolution_scale: Optional[float] = None
):
    """Validate an experiment config and fill in its defaults.

    Loads the config and its scenario, refuses k values inside a threshold
    guard band (with suggested shifted values) and resolves the mode count.

    Args:
        config_path (str): Path to the experiment config JSON (required)
        resolution_scale (float, optional): Grid refinement factor

    Returns:
        dict: Fully resolved config or the error with its class name
    """
    return service.validate_experiment(config_path=config_path, resolution_scale=resolution_scale)


# Tool 2: Run an experiment
@mcp.tool
def run_experiment(
    config_path: str,
    out: Optional[str] = None,
    threads: Optional[int] = None,
    resolution_scale: Optional[float] = None
):
    """Run an experiment pipeline and write its run directory.

    Args:
        config_path (str): Path to the experiment config JSON (required)
        out (str, optional): Run directory, defaults to the config output_dir
        threads (int, optional): Worker threads, defaults to MODESCATTER_THREADS
        resolution_scale (float, optional): Grid refinement factor

    Returns:
        dict: Manifest of written files with hashes and whether every audit passed
    """
    return service.run_experiment_tool(
        config_path=config_path,
        out=out,
        threads=threads,
        resolution_scale=resolution_scale
    )


""" ----- Solver Tools ----- """
# Tool 3: Thresholds
@mcp.tool
def thresholds(
    scenario: Union[str, dict],
    k_max: float
):
    """List the thresholds (mode cut-on frequencies) of a scenario up to k_max.

    Args:
        scenario (str | dict): Bundled scenario name, JSON path or inline scenario (required)
        k_max (float): Largest frequency of interest (required)

    Returns:
        dict: Threshold values with the modes that switch on there
    """
    return service.thresholds(scenario=scenario, k_max=k_max)


# Tool 4: Scattering amplitudes
@mcp.tool
def scattering_amplitudes(
    scenario: Union[str, dict],
    k: float,
    n: int,
    M: Optional[int] = None,
    generalized: bool = False,
    include_field: bool = False
):
    """Solve for incident mode n at frequency k and return the amplitudes.

    Args:
        scenario (str | dict): Bundled scenario name, JSON path or inline scenario (required)
        k (float): Frequency (required)
        n (int): Incident mode index (required)
        M (int, optional): Extract |m| <= M (gratings); default propagating plus 8
        generalized (bool): Allow an evanescent incident mode
        include_field (bool): Also return the total field as [re, im] pairs

    Returns:
        dict: Reflected (and transmitted) amplitudes with propagation flags
    """
    return service.scattering_amplitudes(
        scenario=scenario,
        k=k,
        n=n,
        M=M,
        generalized=generalized,
        include_field=include_field
    )


# Tool 5: DtN matrix
@mcp.tool
def dtn_matrix(
    scenario: Union[str, dict],
    k: float,
    M: int
):
    """Compute the Dirichlet-to-Neumann matrix of the lower domain at x2 = T.

    Args:
        scenario (str | dict): Bundled scenario name, JSON path or inline scenario (required)
        k (float): Frequency (required)
        M (int): Basis size, |m| <= M for gratings or modes 1..M for wave guides (required)

    Returns:
        dict: Matrix entries as [re, im] pairs, indices and the symmetry defect
    """
    return service.dtn_matrix(scenario=scenario, k=k, M=M)


""" ----- Resources -----"""
TOLERANCES_PATH = RESOURCES_DIR / 'tolerances.json'

with open(TOLERANCES_PATH, 'r') as f:
    TOLERANCES_DATA = json.load(f)

# Resource 1: audit tolerances
@mcp.resource("scenario://tolerances", mime_type="application/json")
def tolerances():
    """Default audit tolerances used when a config does not override them.

    Returns:
        dict: Tolerance per audit name
    """
    return TOLERANCES_DATA


# Resource 2: bundled scenario names
@mcp.resource("scenario://list", mime_type="application/json")
def scenario_list():
    """Names of the bundled reference scenarios.

    Returns:
        list: Scenario names usable wherever a scenario is expected
    """
    return sorted(service.bundled_scenarios())


# Resource Template 3: one bundled scenario
@mcp.resource("scenario://{name}", mime_type="application/json")
def scenario_detail(name: str):
    """Get a bundled scenario definition.

    Args:
        name: Scenario name (e.g., 'smooth_eps', 'waveguide')

    Returns:
        dict: Scenario JSON
    """
    scenarios = service.bundled_scenarios()
    if name in scenarios:
        return scenarios[name]
    return {"error": f"Scenario '{name}' not found"}


""" ----- Prompts -----"""

# Prompt 1: How to run experiments
@mcp.prompt()
def experiment_guide_prompt():
    """Guidelines for choosing scenarios and experiment kinds"""
    return experiment_guide()

# Prompt 2: Audit rules
@mcp.prompt()
def get_audit_rules():
    """Rules behind every audit and exit code"""
    return audit_rules()


# Prompt 3: Quick reference for valid values
@mcp.prompt()
def valid_values_reference():
    """Quick reference for all valid config field values"""
    return quick_reference()

if __name__ == "__main__":
    mcp.run(transport="http", host="0.0.0.0", port=8000)
