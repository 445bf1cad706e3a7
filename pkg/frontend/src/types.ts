export interface AttributeInfo {
    name: string;
    index: number;
    axis: string;
}

export interface GenerationTag {
    model_id: string;
    params: number[];
    seed: number;
}

export interface NeighborInfo {
    id: number;
    model_id: string;
    distance: number;
}

export interface GenerateRequest {
    attributes: Record<string, number>;
    size?: number;
    top_k?: number;
}

export interface GenerateResponse {
    image_url: string;
    tag: GenerationTag;
    neighbor_id: number;
    neighbor_distance: number;
    neighbors: NeighborInfo[];
    closed_loop_mse: number;
    query_point: number[];
}

export interface HistoryEntry {
    request: GenerateRequest;
    response: GenerateResponse;
    at: number;
}
