from vmtunet.core.visualization.panel import compose_panel, mask_boundary, overlay_contour, save_panel

__all__ = ["compose_panel", "mask_boundary", "overlay_contour", "save_panel"]
