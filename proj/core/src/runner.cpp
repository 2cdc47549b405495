namespace fblab {}
