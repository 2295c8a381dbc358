# UDP signing server package
