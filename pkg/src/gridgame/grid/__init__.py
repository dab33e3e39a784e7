"""Power-system data model, case ingestion and DC power flow."""
from gridgame.grid.flow import (
    FlowState,
    dc_power_flow,
    default_slack,
    disruption,
    incident_line_indices,
    incident_lines,
    laplacian,
    line_weight,
)
from gridgame.grid.io import (
    bundled_case,
    dumps_network,
    load_matpower,
    load_network,
    loads_network,
    network_from_dict,
    network_schema,
    network_to_dict,
    parse_matpower_case,
)
from gridgame.grid.model import (
    CoherencyConfig,
    Generator,
    PowerNetwork,
    Substation,
    TransmissionLine,
    components,
)
