# 瓦片 B 样条工具包
